"""Bech32 checksum validation."""

CHARSET = "qpzry9x8gf2tvdw0s3jn54khce6mua7l"
SEPARATOR = "1"
MAX_LENGTH = 90
CHECKSUM_LENGTH = 6

_GENERATOR = (0x3B6A57B2, 0x26508E6D, 0x1EA119FA, 0x3D4233DD, 0x2A1462B3)


def polymod(values: list[int]) -> int:
    checksum = 1
    for value in values:
        top = checksum >> 25
        checksum = (checksum & 0x1FFFFFF) << 5 ^ value
        for i, generator in enumerate(_GENERATOR):
            if (top >> i) & 1:
                checksum ^= generator
    return checksum


def hrp_expand(hrp: str) -> list[int]:
    return [ord(c) >> 5 for c in hrp] + [0] + [ord(c) & 31 for c in hrp]


def decode(text: str) -> tuple[str, list[int]] | None:
    """Split a Bech32 string into (hrp, data words), or None if invalid."""
    if not text or len(text) > MAX_LENGTH:
        return None
    if any(ord(c) < 33 or ord(c) > 126 for c in text):
        return None
    if text.lower() != text and text.upper() != text:
        return None
    text = text.lower()
    pos = text.rfind(SEPARATOR)
    if pos < 1 or pos + CHECKSUM_LENGTH + 1 > len(text):
        return None
    hrp = text[:pos]
    if any(c not in CHARSET for c in text[pos + 1:]):
        return None
    data = [CHARSET.find(c) for c in text[pos + 1:]]
    if polymod(hrp_expand(hrp) + data) != 1:
        return None
    return hrp, data[:-CHECKSUM_LENGTH]


def is_valid(text: str) -> bool:
    return decode(text) is not None
