"""Galerkin assembly of boundary-integral blocks and block systems."""

from .blocks import (
    AssemblyError,
    BlockSystem,
    DiffBlocks,
    OperatorBlock,
    assemble_diff_blocks,
    assemble_K_cross,
    assemble_K_same,
    assemble_L,
    assemble_S,
    assemble_l21,
    assemble_schur,
    assemble_T,
    assemble_tilde_L,
    diff_blocks,
    system_from_diff,
    tilde_basis,
    tilde_from_diff,
)
from .engine import WORKERS_ENV, compute_blocks, default_workers
from .geometry import QuadratureOrders

__all__ = [
    "AssemblyError", "BlockSystem", "DiffBlocks", "OperatorBlock", "QuadratureOrders",
    "WORKERS_ENV", "assemble_K_cross", "assemble_K_same", "assemble_L", "assemble_S",
    "assemble_T", "assemble_diff_blocks", "assemble_l21", "assemble_schur", "assemble_tilde_L",
    "compute_blocks", "default_workers", "diff_blocks", "system_from_diff", "tilde_basis",
    "tilde_from_diff",
]
