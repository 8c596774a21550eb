from hypothesis import given, strategies as st

from dvbts.crc import crc32_mpeg
from oracles import crc32_bitwise


def test_check_value():
    assert crc32_bitwise(b"123456789") == 0x0376E6E7
    assert crc32_mpeg(b"123456789") == 0x0376E6E7


def test_empty_input_is_initial_register():
    assert crc32_mpeg(b"") == 0xFFFFFFFF


@given(st.binary(max_size=600))
def test_table_matches_shift_register(data):
    assert crc32_mpeg(data) == crc32_bitwise(data)


@given(st.binary(max_size=300))
def test_appended_crc_leaves_zero_residue(data):
    crc = crc32_mpeg(data)
    assert crc32_mpeg(data + crc.to_bytes(4, "big")) == 0


@given(st.binary(max_size=200), st.binary(max_size=200))
def test_incremental_update(a, b):
    assert crc32_mpeg(b, crc32_mpeg(a)) == crc32_mpeg(a + b)
