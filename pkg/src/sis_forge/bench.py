"""Experiment drivers: convergence curves, N/L sweeps and gradient checks.

All outputs are plain CSV. Every cell is an independent training run, so
cells may execute in worker processes; rows are always written back in a
canonical order, making the files independent of the worker count apart
from the ``seconds`` column.
"""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import objectives, sisnet, trainer
from .config import ExperimentSpec, TrainConfig
from .errors import SisError
from .sisnet import LinkState

CONVERGENCE_HEADER = ["objective", "epoch", "train_loss", "train_ser", "test_ser", "seconds"]
SWEEP_HEADER = ["objective", "N", "L", "seed", "final_test_ser", "stderr", "seconds", "status"]
GRADCHECK_TOL = 1e-4


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if not math.isfinite(x) else repr(x)


def worker_count(requested: int | None) -> int:
    n = requested or 1
    cap = os.environ.get("SIS_FORGE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            yield job, fn(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for job, res in zip(jobs, pool.map(fn, jobs)):
            yield job, res


def save_checkpoint(result: trainer.TrainResult, directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    result.stack_t.save(directory / "tx.txt")
    result.stack_r.save(directory / "rx.txt")


def load_checkpoint(directory):
    directory = Path(directory)
    return (sisnet.PhaseStack.load(directory / "tx.txt"),
            sisnet.PhaseStack.load(directory / "rx.txt"))


# -- convergence ---------------------------------------------------------------

def _convergence_job(args):
    cfg, out_dir = args
    part = Path(out_dir) / f"convergence_{cfg.objective}.csv"
    with open(part, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONVERGENCE_HEADER)
        fh.flush()

        def on_epoch(rec):
            w.writerow([cfg.objective, rec.epoch, fmt(rec.train_loss), fmt(rec.train_ser),
                        fmt(rec.test_ser), f"{rec.seconds:.3f}"])
            fh.flush()

        result = trainer.train(cfg, on_epoch=on_epoch)
    save_checkpoint(result, Path(out_dir) / "checkpoints" / cfg.objective)
    return part


def run_convergence(spec: ExperimentSpec, out_dir=None, workers=None) -> Path:
    """Train once per objective and write ``convergence.csv``."""
    out = Path(out_dir or spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(spec.base.replace(objective=o), str(out)) for o in spec.objectives]
    parts = [part for _, part in _map(_convergence_job, jobs, worker_count(workers))]
    target = out / "convergence.csv"
    with open(target, "w", newline="") as fh:
        fh.write(",".join(CONVERGENCE_HEADER) + "\n")
        for part in parts:
            lines = Path(part).read_text().splitlines()[1:]
            fh.writelines(ln + "\n" for ln in lines)
    return target


# -- sweep ---------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    objective: str
    n: int
    layers: int
    seed: int

    @property
    def key(self):
        return (self.objective, str(self.n), str(self.layers), str(self.seed))


def sweep_cells(spec: ExperimentSpec, seeds=None):
    seeds = spec.seeds if seeds is None else seeds
    return [Cell(o, n, l, s) for o in spec.objectives for n in spec.sweep_n
            for l in spec.sweep_l for s in seeds]


def _sweep_job(args):
    base, cell, out_dir = args
    t0 = time.perf_counter()
    try:
        cfg = base.replace(objective=cell.objective, nt=cell.n, nr=cell.n, lt=cell.layers,
                           lr=cell.layers, seed=cell.seed)
        result = trainer.train(cfg, evaluate_initial=False)
        name = f"{cell.objective}_N{cell.n}_L{cell.layers}_s{cell.seed}"
        save_checkpoint(result, Path(out_dir) / "checkpoints" / name)
        ser, err = result.final.ser, result.final.stderr
        status = "ok"
    except (SisError, FloatingPointError, np.linalg.LinAlgError) as exc:
        ser = err = float("nan")
        status = "failed:" + type(exc).__name__
    return [cell.objective, cell.n, cell.layers, cell.seed, fmt(ser), fmt(err),
            f"{time.perf_counter() - t0:.3f}", status]


def read_rows(path: Path):
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[1:] if rows and rows[0] == SWEEP_HEADER else []


def run_sweep(spec: ExperimentSpec, out_dir=None, workers=None, seeds=None) -> Path:
    """One trained model per (objective, N, L, seed) cell, written to ``sweep.csv``.

    Completed cells already present in the file are skipped, so an
    interrupted sweep resumes where it stopped.
    """
    out = Path(out_dir or spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "sweep.csv"
    cells = sweep_cells(spec, seeds)
    done = {tuple(r[:4]): r for r in read_rows(target) if r[-1] == "ok"}
    todo = [c for c in cells if c.key not in done]
    rows = dict(done)
    if not target.exists() or not done:
        with open(target, "w", newline="") as fh:
            csv.writer(fh).writerow(SWEEP_HEADER)
    jobs = [(spec.base, c, str(out)) for c in todo]
    with open(target, "a", newline="") as fh:
        w = csv.writer(fh)
        for (_, cell, _), row in _map(_sweep_job, jobs, worker_count(workers)):
            w.writerow(row)
            fh.flush()
            rows[cell.key] = row
    # canonical order for the final file
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for c in cells:
            w.writerow(rows[c.key])
    return target


# -- gradient check ------------------------------------------------------------

def gradcheck_config(base: TrainConfig) -> TrainConfig:
    return base.replace(nt=9, nr=9, lt=2, lr=2, mt=2, mr=2, symbols_per_block=4,
                        batch_size=3, chunk_size=2)


def run_gradcheck(spec: ExperimentSpec, samples=200, corrupt=False):
    """Finite-difference check of both objectives on a small instance.

    Returns ``(report_text, ok)``. ``corrupt`` perturbs the analytic
    gradient so the failure path can be exercised.
    """
    cfg = gradcheck_config(spec.base)
    link = trainer.Link.from_config(cfg)
    lines = [f"gradient check: N={cfg.nt} L={cfg.lt} M={cfg.mt} T={cfg.symbols_per_block} "
             f"tolerance {GRADCHECK_TOL:g}"]
    worst = 0.0
    for obj in objectives.OBJECTIVES:
        stack_t, stack_r = trainer.init_phases(cfg, np.random.default_rng(cfg.seed))

        def loss_and_grad(st, sr, obj=obj):
            state = LinkState.build(st, sr, link.kernels_t, link.kernels_r)
            loss, g_phi, g_theta, _ = trainer.batch_step(link, state, obj, 0, cfg.batch_size)
            if corrupt:
                g_phi = g_phi * 1.01
            return loss, g_phi, g_theta

        rep = sisnet.finite_diff_check(stack_t, stack_r, loss_and_grad, samples,
                                       np.random.default_rng(cfg.seed + 1))
        worst = max(worst, rep.max_rel_error)
        status = "PASS" if rep.max_rel_error <= GRADCHECK_TOL else "FAIL"
        lines.append(f"[{status}] {obj}: " + rep.lines()[0])
        lines.extend(rep.lines()[1:])
    ok = worst <= GRADCHECK_TOL
    lines.append(f"overall {'PASS' if ok else 'FAIL'}: max relative error {worst:.3e}")
    return "\n".join(lines), ok
