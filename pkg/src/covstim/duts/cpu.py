"""Small RV32I CPU: 10 R-type ALU ops, the three stores, and JAL.

Stimuli are instruction-memory updates, a list of (address, word) pairs
applied before each step. The CPU fetches at pc (a missing word reads as
zero), decodes against the 14-op subset, and executes; anything else is a
NOP that only advances pc. Writes to x0 are discarded. JAL stores pc+4 in
rd and adds its sign-extended offset to pc; offsets >= 0 count as forward
jumps. The encodable offset is a multiple of 2, so jump targets are masked
to word alignment to keep pc fetchable.

Coverage: per-op seen/zero_dst/zero_src/same_src bins (where the fields
exist), jump direction bins, and one read-after-write hazard bin per
(writer op, reader op) pair of back-to-back executed instructions. An
executed NOP breaks hazard adjacency.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

from covstim import rv32i
from covstim.coverage import BinDescriptor, CoveragePlan, Difficulty
from covstim.duts import FORMAT_MEMORY_UPDATES, MalformedStimulusError
from covstim.duts.decoder import op_table

_MASK = 0xFFFFFFFF
_JAL_OPCODE = 0x6F
_STORE_OPCODE = 0x23
_R_OPCODE = 0x33
_STORE_F3 = {0: "sb", 1: "sh", 2: "sw"}

R_OPS = ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and")
STORE_OPS = ("sb", "sh", "sw")
CPU_OPS = R_OPS + STORE_OPS + ("jal",)

CPU_WRITERS = frozenset(R_OPS) | {"jal"}
CPU_READERS = frozenset(R_OPS) | set(STORE_OPS)

NOP = "nop"


@dataclass(frozen=True)
class CpuDecode:
    op: str  # one of CPU_OPS or "nop"
    rs1: Optional[int] = None
    rs2: Optional[int] = None
    rd: Optional[int] = None
    imm: Optional[int] = None


_NOP_DECODE = CpuDecode(op=NOP)


@lru_cache(maxsize=1)
def _r_dispatch() -> dict[tuple[int, int], str]:
    # R-type encodings come from the shipped decoder table; sh and jal are
    # cpu-only and handled directly.
    table = {}
    for op in op_table()["ops"]:
        if op["format"] == "r":
            table[(op["funct3"], op["funct7"])] = op["name"]
    return table


def decode_cpu(word: int) -> CpuDecode:
    word &= _MASK
    opc = rv32i.opcode(word)
    if opc == _R_OPCODE:
        name = _r_dispatch().get((rv32i.funct3(word), rv32i.funct7(word)))
        if name is None:
            return _NOP_DECODE
        return CpuDecode(op=name, rs1=rv32i.rs1(word), rs2=rv32i.rs2(word), rd=rv32i.rd(word))
    if opc == _STORE_OPCODE:
        name = _STORE_F3.get(rv32i.funct3(word))
        if name is None:
            return _NOP_DECODE
        return CpuDecode(op=name, rs1=rv32i.rs1(word), rs2=rv32i.rs2(word), imm=rv32i.imm_s(word))
    if opc == _JAL_OPCODE:
        return CpuDecode(op="jal", rd=rv32i.rd(word), imm=rv32i.imm_j(word))
    return _NOP_DECODE


def encode_cpu(op: str, rd: int = 0, rs1: int = 0, rs2: int = 0, imm: int = 0) -> int:
    """Assemble a word for one of the 14 cpu ops."""
    if op == "jal":
        return rv32i.encode_j(_JAL_OPCODE, rd, imm)
    if op in _STORE_F3.values():
        f3 = {"sb": 0, "sh": 1, "sw": 2}[op]
        return rv32i.encode_s(_STORE_OPCODE, f3, rs1, rs2, imm)
    for (f3, f7), name in _r_dispatch().items():
        if name == op:
            return rv32i.encode_r(_R_OPCODE, f3, f7, rd, rs1, rs2)
    raise ValueError(f"unknown cpu op {op!r}")


def cpu_bins_for(
    prev: Optional[CpuDecode], cur: CpuDecode, jump_dir: Optional[str]
) -> list[str]:
    """Coverage bins for one executed instruction given its predecessor."""
    if cur.op == NOP:
        return []
    bins = [f"{cur.op}_seen"]
    if cur.rd is not None and cur.rd == 0:
        bins.append(f"{cur.op}_zero_dst")
    if cur.rs1 is not None:
        if cur.rs1 == 0 or cur.rs2 == 0:
            bins.append(f"{cur.op}_zero_src")
        if cur.rs1 == cur.rs2:
            bins.append(f"{cur.op}_same_src")
    if jump_dir is not None:
        bins.append(f"jump_{jump_dir}")
    if (
        prev is not None
        and prev.op in CPU_WRITERS
        and prev.rd not in (None, 0)
        and cur.op in CPU_READERS
        and prev.rd in (cur.rs1, cur.rs2)
    ):
        bins.append(f"hazard_{prev.op}_{cur.op}")
    return bins


@lru_cache(maxsize=1)
def cpu_plan() -> CoveragePlan:
    bins = []
    for op in CPU_OPS:
        bins.append(
            BinDescriptor(
                id=f"{op}_seen",
                description=f"instruction {op.upper()} executed",
                difficulty=Difficulty.EASIER,
                group="operation",
            )
        )
        if op in CPU_WRITERS:
            bins.append(
                BinDescriptor(
                    id=f"{op}_zero_dst",
                    description=f"{op.upper()} executed with destination register x0",
                    difficulty=Difficulty.HARDER,
                    group="operation",
                )
            )
        if op in CPU_READERS:
            bins.append(
                BinDescriptor(
                    id=f"{op}_zero_src",
                    description=f"{op.upper()} executed with x0 as a source register",
                    difficulty=Difficulty.HARDER,
                    group="operation",
                )
            )
            bins.append(
                BinDescriptor(
                    id=f"{op}_same_src",
                    description=f"{op.upper()} executed with both source registers equal",
                    difficulty=Difficulty.HARDER,
                    group="operation",
                )
            )
    for direction in ("forward", "backward"):
        bins.append(
            BinDescriptor(
                id=f"jump_{direction}",
                description=f"JAL taken with a {direction} offset "
                "(zero counts as forward)",
                difficulty=Difficulty.HARDER,
                group="jump",
            )
        )
    for writer in sorted(CPU_WRITERS):
        for reader in sorted(CPU_READERS):
            bins.append(
                BinDescriptor(
                    id=f"hazard_{writer}_{reader}",
                    description=(
                        f"{writer.upper()} writing a register (not x0) immediately "
                        f"followed by {reader.upper()} reading it (read-after-write)"
                    ),
                    difficulty=Difficulty.HARDER,
                    group="hazard",
                )
            )
    return CoveragePlan("cpu", bins)


@dataclass
class CpuState:
    pc: int = 0
    regs: list[int] = field(default_factory=lambda: [0] * 32)
    imem: dict[int, int] = field(default_factory=dict)
    dmem: dict[int, int] = field(default_factory=dict)


def _signed(v: int) -> int:
    return v - 2**32 if v >= 2**31 else v


def _alu(op: str, a: int, b: int) -> int:
    if op == "add":
        return (a + b) & _MASK
    if op == "sub":
        return (a - b) & _MASK
    if op == "sll":
        return (a << (b & 31)) & _MASK
    if op == "slt":
        return 1 if _signed(a) < _signed(b) else 0
    if op == "sltu":
        return 1 if a < b else 0
    if op == "xor":
        return a ^ b
    if op == "srl":
        return a >> (b & 31)
    if op == "sra":
        return (_signed(a) >> (b & 31)) & _MASK
    if op == "or":
        return a | b
    return a & b  # "and"


class CpuDut:
    """One timestep = apply instruction-memory updates, then execute once."""

    kind = "cpu"
    stimulus_format = FORMAT_MEMORY_UPDATES

    def __init__(self) -> None:
        self.plan = cpu_plan()
        self.reset()

    def reset(self) -> None:
        self.state = CpuState()
        self.last_word: Optional[int] = None
        self.last_decode: CpuDecode = _NOP_DECODE
        self._prev_decode: Optional[CpuDecode] = None

    def apply_updates(self, updates: Sequence[Sequence[int]]) -> None:
        """Validate all updates, then apply; misaligned addresses reject the lot."""
        staged = []
        for pair in updates:
            if len(pair) != 2:
                raise MalformedStimulusError(f"update must be [address, word]: {pair!r}")
            addr, word = int(pair[0]) & _MASK, int(pair[1]) & _MASK
            if addr % 4 != 0:
                raise MalformedStimulusError(f"misaligned update address 0x{addr:08x}")
            staged.append((addr, word))
        for addr, word in staged:
            self.state.imem[addr] = word

    def step(self) -> list[str]:
        s = self.state
        word = s.imem.get(s.pc, 0)
        dec = decode_cpu(word)
        jump_dir = None
        if dec.op in CPU_WRITERS and dec.op != "jal":
            value = _alu(dec.op, s.regs[dec.rs1], s.regs[dec.rs2])
            if dec.rd != 0:
                s.regs[dec.rd] = value
            s.pc = (s.pc + 4) & _MASK
        elif dec.op in STORE_OPS:
            addr = (s.regs[dec.rs1] + dec.imm) & _MASK
            value = s.regs[dec.rs2]
            width = {"sb": 1, "sh": 2, "sw": 4}[dec.op]
            for i in range(width):
                s.dmem[(addr + i) & _MASK] = (value >> (8 * i)) & 0xFF
            s.pc = (s.pc + 4) & _MASK
        elif dec.op == "jal":
            if dec.rd != 0:
                s.regs[dec.rd] = (s.pc + 4) & _MASK
            jump_dir = "forward" if dec.imm >= 0 else "backward"
            # encodable offsets are even but not always multiples of 4
            s.pc = (s.pc + dec.imm) & _MASK & ~0x3
        else:
            s.pc = (s.pc + 4) & _MASK
        bins = cpu_bins_for(self._prev_decode, dec, jump_dir)
        self._prev_decode = dec
        self.last_word = word
        self.last_decode = dec
        return bins

    def feed(self, stimulus: Sequence[Sequence[int]]) -> list[str]:
        self.apply_updates(stimulus)
        return self.step()

    def extras(self) -> dict:
        return {
            "pc": self.state.pc,
            "last_word": self.last_word,
            "last_op": self.last_decode.op,
        }
