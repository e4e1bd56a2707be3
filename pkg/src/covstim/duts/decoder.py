"""RV32I decoder subset: 26 ALU, shift, load, and store ops.

The op/port table ships as package data (data/rv32i_ops.json) and is the
single source of truth for encodings, port usage, and the generated coverage
plan: one bin per op, one per (register, port) pair, and one per
op x register x port cross for the ports that op actually uses. Words that
do not match any table entry decode to the illegal value and hit nothing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from covstim import rv32i
from covstim.coverage import BinDescriptor, CoveragePlan, Difficulty
from covstim.duts import FORMAT_INTEGERS

ILLEGAL = "illegal"

PORT_READ_A = "read_a"  # rs1 field
PORT_READ_B = "read_b"  # rs2 field
PORT_WRITE = "write"  # rd field


@dataclass(frozen=True)
class DecodeResult:
    op: str
    rs1: Optional[int] = None
    rs2: Optional[int] = None
    rd: Optional[int] = None
    imm: Optional[int] = None
    shamt: Optional[int] = None

    @property
    def is_illegal(self) -> bool:
        return self.op == ILLEGAL

    def ports(self) -> list[tuple[int, str]]:
        """(register, port) pairs this instruction touches."""
        pairs = []
        if self.rs1 is not None:
            pairs.append((self.rs1, PORT_READ_A))
        if self.rs2 is not None:
            pairs.append((self.rs2, PORT_READ_B))
        if self.rd is not None:
            pairs.append((self.rd, PORT_WRITE))
        return pairs


_ILLEGAL_RESULT = DecodeResult(op=ILLEGAL)


@lru_cache(maxsize=1)
def op_table() -> dict:
    raw = resources.files("covstim").joinpath("data/rv32i_ops.json").read_text()
    table = json.loads(raw)
    for op in table["ops"]:
        op["opcode"] = int(op["opcode"], 16)
        if op["funct7"] is not None:
            op["funct7"] = int(op["funct7"], 16)
    return table


@lru_cache(maxsize=1)
def _dispatch() -> dict[tuple[int, int], list[dict]]:
    index: dict[tuple[int, int], list[dict]] = {}
    for op in op_table()["ops"]:
        index.setdefault((op["opcode"], op["funct3"]), []).append(op)
    return index


def decode(word: int) -> DecodeResult:
    """Total function: unmatched words decode to the illegal value."""
    word &= rv32i.MASK32
    candidates = _dispatch().get((rv32i.opcode(word), rv32i.funct3(word)))
    if not candidates:
        return _ILLEGAL_RESULT
    f7 = rv32i.funct7(word)
    entry = None
    for cand in candidates:
        if cand["funct7"] is None or cand["funct7"] == f7:
            entry = cand
            break
    if entry is None:
        return _ILLEGAL_RESULT
    fmt = entry["format"]
    if fmt == "r":
        return DecodeResult(
            op=entry["name"], rs1=rv32i.rs1(word), rs2=rv32i.rs2(word), rd=rv32i.rd(word)
        )
    if fmt == "i_shift":
        return DecodeResult(
            op=entry["name"], rs1=rv32i.rs1(word), rd=rv32i.rd(word), shamt=rv32i.rs2(word)
        )
    if fmt == "store":
        return DecodeResult(
            op=entry["name"], rs1=rv32i.rs1(word), rs2=rv32i.rs2(word), imm=rv32i.imm_s(word)
        )
    # "i" and "load"
    return DecodeResult(
        op=entry["name"], rs1=rv32i.rs1(word), rd=rv32i.rd(word), imm=rv32i.imm_i(word)
    )


def encode(
    op: str, rs1: int = 0, rs2: int = 0, rd: int = 0, imm: int = 0, shamt: int = 0
) -> int:
    """Assemble a word for one of the 26 supported ops."""
    entry = next((e for e in op_table()["ops"] if e["name"] == op), None)
    if entry is None:
        raise ValueError(f"unknown op {op!r}")
    fmt = entry["format"]
    if fmt == "r":
        return rv32i.encode_r(entry["opcode"], entry["funct3"], entry["funct7"], rd, rs1, rs2)
    if fmt == "i_shift":
        imm12 = (entry["funct7"] << 5) | (shamt & 0x1F)
        return rv32i.encode_i(entry["opcode"], entry["funct3"], rd, rs1, imm12)
    if fmt == "store":
        return rv32i.encode_s(entry["opcode"], entry["funct3"], rs1, rs2, imm)
    return rv32i.encode_i(entry["opcode"], entry["funct3"], rd, rs1, imm)


def _reg_ids() -> range:
    return range(0, 32) if op_table()["include_x0_ports"] else range(1, 32)


def bins_for(result: DecodeResult) -> list[str]:
    """Op, port, and cross bins hit by one decoded word."""
    if result.is_illegal:
        return []
    include_x0 = op_table()["include_x0_ports"]
    bins = [f"op_{result.op}"]
    for reg, port in result.ports():
        if reg == 0 and not include_x0:
            continue
        bins.append(f"port_x{reg:02d}_{port}")
        bins.append(f"cross_{result.op}_x{reg:02d}_{port}")
    return bins


_PORT_FIELD = {PORT_READ_A: "rs1", PORT_READ_B: "rs2", PORT_WRITE: "rd"}


@lru_cache(maxsize=1)
def decoder_plan() -> CoveragePlan:
    table = op_table()
    bins = []
    for op in table["ops"]:
        f7 = f", funct7 0x{op['funct7']:02x}" if op["funct7"] is not None else ""
        bins.append(
            BinDescriptor(
                id=f"op_{op['name']}",
                description=(
                    f"a 32-bit word decoding to {op['name'].upper()} "
                    f"(opcode 0x{op['opcode']:02x}, funct3 {op['funct3']}{f7})"
                ),
                difficulty=Difficulty.EASIER,
                group="op",
            )
        )
    for reg in _reg_ids():
        for port in (PORT_READ_A, PORT_READ_B, PORT_WRITE):
            bins.append(
                BinDescriptor(
                    id=f"port_x{reg:02d}_{port}",
                    description=(
                        f"register x{reg} observed on decoder port {port} "
                        f"(the {_PORT_FIELD[port]} field) by any supported op"
                    ),
                    difficulty=Difficulty.EASIER,
                    group="port",
                )
            )
    for op in table["ops"]:
        uses = [
            (PORT_READ_A, op["uses_rs1"]),
            (PORT_READ_B, op["uses_rs2"]),
            (PORT_WRITE, op["uses_rd"]),
        ]
        for port, used in uses:
            if not used:
                continue
            for reg in _reg_ids():
                bins.append(
                    BinDescriptor(
                        id=f"cross_{op['name']}_x{reg:02d}_{port}",
                        description=(
                            f"{op['name'].upper()} with register x{reg} on port "
                            f"{port} (the {_PORT_FIELD[port]} field)"
                        ),
                        difficulty=Difficulty.HARDER,
                        group="cross",
                    )
                )
    return CoveragePlan("decoder", bins)


class DecoderMonitor:
    """Feeds 32-bit words through the decoder and reports coverage bins."""

    kind = "decoder"
    stimulus_format = FORMAT_INTEGERS

    def __init__(self) -> None:
        self.plan = decoder_plan()

    def reset(self) -> None:
        pass  # the decoder is stateless

    def feed(self, stimulus: int) -> list[str]:
        return bins_for(decode(stimulus & rv32i.MASK32))

    def extras(self) -> dict:
        return {}
