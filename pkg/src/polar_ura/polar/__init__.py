"""Single-user polar codec: construction, CRC, encoding, SC and CA-SCL decoding."""

from .codec import (
    bpsk,
    ca_scl_decode,
    encode_message,
    expand_punctured,
    generator_matrix,
    polar_encode,
    sc_decode,
    scl_list,
)
from .construction import CodeConstruction, construct_code, mother_exponent_for
from .crc import DEFAULT_CRC, CrcSpec, crc_append, crc_check, crc_check_batch

__all__ = [
    "CodeConstruction",
    "CrcSpec",
    "DEFAULT_CRC",
    "bpsk",
    "ca_scl_decode",
    "construct_code",
    "crc_append",
    "crc_check",
    "crc_check_batch",
    "encode_message",
    "expand_punctured",
    "generator_matrix",
    "mother_exponent_for",
    "polar_encode",
    "sc_decode",
    "scl_list",
]
