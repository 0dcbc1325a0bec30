"""Subprocess adapter for an external CBC binary.

Protocol: the model is exported to ``model.mps`` in a scratch directory,
the binary is invoked as ``cbc model.mps [-ratio gap] [-sec limit] -solve
-solu solution.txt`` and the solution file is read back.  The binary is
taken from ``SolveOptions.solver_path``, else the ``SODTA_CBC`` environment
variable, else ``cbc`` on ``PATH``.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .model import LinearModel
from .mps import export_model
from .solve import Solution, SolveOptions, SolverError, Status

ENV_VAR = "SODTA_CBC"


def find_cbc(explicit: str | None = None) -> str:
    path = explicit or os.environ.get(ENV_VAR) or shutil.which("cbc")
    if not path or not Path(path).exists():
        raise SolverError(f"CBC binary not found; set {ENV_VAR} or pass solver_path")
    return str(path)


def read_cbc_solution(text: str, model: LinearModel) -> Solution:
    lines = text.splitlines()
    if not lines:
        raise SolverError("empty CBC solution file")
    head = lines[0].lower()
    if head.startswith("optimal"):
        status = Status.OPTIMAL
    elif "infeasible" in head:
        return Solution(Status.INFEASIBLE, stats={"message": lines[0]})
    elif "unbounded" in head:
        return Solution(Status.UNBOUNDED, stats={"message": lines[0]})
    elif "stopped" in head:
        status = Status.LIMIT
    else:
        raise SolverError(f"unrecognised CBC status line: {lines[0]!r}")
    objective = float(head.rsplit(None, 1)[-1])
    values = np.zeros(model.n_vars)
    for ln in lines[1:]:
        tok = ln.replace("**", " ").split()
        if len(tok) < 3:
            continue
        values[model.var(tok[1])] = float(tok[2])
    if status is Status.LIMIT:
        return Solution(status, objective, None, {"message": lines[0]})
    return Solution(status, objective, values, {"message": lines[0]})


def solve_cbc(model: LinearModel, opts: SolveOptions) -> Solution:
    binary = find_cbc(opts.solver_path)
    with tempfile.TemporaryDirectory(prefix="sodta-cbc-") as tmp:
        mps = Path(tmp) / "model.mps"
        sol = Path(tmp) / "solution.txt"
        mps.write_text(export_model(model))
        cmd = [binary, str(mps), "-primalT", repr(opts.primal_tol)]
        if model.has_integers:
            cmd += ["-ratio", repr(opts.mip_gap), "-integerT", repr(opts.integrality_tol)]
        if opts.time_limit is not None:
            cmd += ["-sec", repr(opts.time_limit)]
        cmd += ["-solve", "-solu", str(sol)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0 or not sol.exists():
            raise SolverError(f"CBC exited with {proc.returncode}: {proc.stdout[-2000:]}")
        return read_cbc_solution(sol.read_text(), model)
