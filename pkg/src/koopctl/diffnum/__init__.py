"""Dense small-matrix numerics and a matrix-level reverse-mode tape."""
from .linalg import eig_small, lu_factor, lu_solve, solve as solve_plain, svd_thin, sym_eig
from .tape import (
    Tape,
    Var,
    add,
    add_identity,
    gaussian_logp,
    hstack,
    matmul,
    mul,
    neg,
    relu,
    row,
    scale,
    solve,
    sub,
    sum_all,
    take_rows,
    trace,
    transpose,
    value,
    vstack,
)
