"""CRC-32/MPEG-2 as used to protect PSI/SI sections.

Polynomial 0x04C11DB7, initial register 0xFFFFFFFF, MSB first, no reflection
and no final XOR. Appending the big-endian CRC to the covered bytes yields a
residue of zero, which is how sections are validated.
"""

POLY = 0x04C11DB7


def _make_table():
    table = []
    for byte in range(256):
        crc = byte << 24
        for _ in range(8):
            crc = ((crc << 1) ^ POLY) if crc & 0x80000000 else (crc << 1)
        table.append(crc & 0xFFFFFFFF)
    return tuple(table)


_TABLE = _make_table()


def crc32_mpeg(data, crc=0xFFFFFFFF):
    """Return the CRC-32/MPEG-2 of *data* (any bytes-like object)."""
    table = _TABLE
    for b in bytes(data):
        crc = ((crc << 8) & 0xFFFFFFFF) ^ table[(crc >> 24) ^ b]
    return crc
