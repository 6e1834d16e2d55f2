"""The acceptance campaign: every exit criterion as a checkable function.

Each criterion runs at the default desk scale (512 cells, age horizon 20,
time horizon 50) and returns a result with the measured quantities, so the
CLI `verify` subcommand and the test suite share one implementation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleDeltaError
from .experiments import (cosine_perturbation, decay_experiment, decay_rate_fit,
                          oracle_compare_constant_rate, regime_sweep)
from .io_utils import write_csv, write_json
from .kernels import DiracKernel, ExponentialKernel, GammaKernel, TabulatedKernel
from .linops import (assemble, compute_spectrum, constants_adjoint_defect,
                     dissipative_part, kernel_direction_defect,
                     semigroup_decay_probe)
from .params import ModelParams
from .rates import ConstantRate, SmoothRate, StepRate
from .steady import discrete_stationary, psi_eval, solve_steady
from .transport import contraction_probe, run

__all__ = ["CriterionResult", "ALL_CRITERIA", "run_verification", "emit_campaign_csvs"]


@dataclass
class CriterionResult:
    key: str
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0


def _params(n: int = 512, **kw) -> ModelParams:
    return ModelParams(n_cells=n, **kw)


def _smooth() -> SmoothRate:
    return SmoothRate(1.0, 2.0, 1.0, 1.0)


def _step() -> StepRate:
    return StepRate(0.5, 0.25, 1.0)


def _kernels() -> list:
    tab_y = np.linspace(0.0, 8.0, 161)
    return [DiracKernel(),
            ExponentialKernel(lam=2.0, delta=1.0),
            GammaKernel(shape=2.0, scale=0.5, delta=1.0),
            TabulatedKernel(y=tuple(tab_y), b=tuple(2.0 * np.exp(-2.0 * tab_y)), delta=1.0)]


def criterion_mass_conservation(seed: int = 7) -> CriterionResult:
    """Per-step mass drift <= 1e-6 and cumulative renormalization <= 1e-4
    over the full horizon, for every built-in model and kernel."""
    p = _params()
    x = p.grid()
    details, ok = {}, True
    for mname, model, eps in [("constant", ConstantRate(1.0), 1.0),
                              ("smooth", _smooth(), 1e3),
                              ("step", _step(), 1e3)]:
        prof, m_star = discrete_stationary(model, eps, p)
        f0 = cosine_perturbation(prof, 0.05, x, p.x_max)
        if isinstance(model, StepRate):
            f0 = np.clip(f0, 0.0, 1.0)
        for kernel in _kernels():
            traj = run(f0.copy(), model, kernel, eps, p, reference=prof,
                       prehistory=m_star)
            drift = traj.max_mass_drift
            cum = abs(traj.cumulative_renorm - 1.0)
            key = f"{mname}/{type(kernel).__name__}"
            details[key] = {"max_step_drift": drift, "cumulative_renorm_dev": cum}
            ok &= drift <= 1e-6 and cum <= 1e-4
    return CriterionResult("mass_conservation", "mass conservation", ok, details)


def criterion_characteristics_oracle() -> CriterionResult:
    """Constant rate, unit block start: max L1 error <= 5 dx against the
    closed-form characteristics solution; error ratio under grid doubling
    in [1.7, 2.3]."""
    errs = {}
    for n in (512, 1024):
        p = _params(n)
        f0 = (p.grid() < 1.0).astype(float)
        _, _, emax = oracle_compare_constant_rate(f0, p)
        errs[n] = emax
    p512 = _params(512)
    ratio = errs[512] / errs[1024]
    ok = errs[512] <= 5 * p512.dx and errs[1024] <= 5 * _params(1024).dx \
        and 1.7 <= ratio <= 2.3
    return CriterionResult("characteristics_oracle", "characteristics oracle", ok,
                           {"err_512": errs[512], "err_1024": errs[1024],
                            "bound_512": 5 * p512.dx, "ratio": ratio})


def criterion_steady_state() -> CriterionResult:
    """Consistency of the stationary activity equation at 1e-10 (smooth) and
    the closed form at 1e-12 (step), exact step bounds, and the exponential
    envelope on every grid point."""
    p = _params()
    details, ok = {}, True
    sm = _smooth()
    for eps in (1e2, 1e3, 1e4):
        st = solve_steady(sm, eps, p)
        psi_res = abs(psi_eval(sm, eps, st.m, p.x_max) - 1.0)
        envelope = float(np.max(st.f * np.exp(0.5 * sm.a0 * st.x))) <= st.m + 1e-12
        mass_dev = abs(st.mass - 1.0)
        details[f"smooth/eps={eps:g}"] = {
            "psi_residual": psi_res, "mass_dev": mass_dev,
            "boundary_gap": abs(st.f[0] - st.m), "envelope_ok": envelope}
        ok &= psi_res <= 1e-10 and mass_dev <= 1e-8 and envelope
        ok &= abs(st.f[0] - st.m) <= 1.5 * p.dx
    stp = _step()
    for eps in (0.0, 1e3):
        st = solve_steady(stp, eps, p)
        closed = abs(st.m * (1.0 + float(stp.sigma(eps * st.m))) - 1.0)
        bounds = (1.0 - stp.sigma_plus <= st.m <= 1.0
                  and np.all(st.f >= 0.0) and np.all(st.f <= 1.0))
        k_env = st.m * np.exp(0.5 * st.sigma_eps)
        envelope = bool(np.all(st.f <= k_env * np.exp(-0.5 * st.x) + 1e-12))
        details[f"step/eps={eps:g}"] = {
            "closed_form_residual": closed, "bounds_exact": bool(bounds),
            "mass_dev": abs(st.mass - 1.0), "envelope_ok": envelope}
        ok &= closed <= 1e-12 and bounds and envelope and abs(st.mass - 1.0) <= 1e-8
    return CriterionResult("steady_state", "steady-state construction", ok, details)


def criterion_linearization_structure() -> CriterionResult:
    """Generator applied to the stationary direction and the mass functional
    composed with the generator are both O(dx), with the former halving
    under grid doubling (alignment-tolerant band for step kinds) and the
    latter vanishing to roundoff."""
    expk = ExponentialKernel(lam=2.0, delta=1.0)
    configs = [
        ("constant/nodelay", ConstantRate(1.0), 1.0, DiracKernel(), (1.7, 2.3)),
        ("smooth1e3/nodelay", _smooth(), 1e3, DiracKernel(), (1.7, 2.3)),
        ("smooth1e3/delay", _smooth(), 1e3, expk, (1.7, 2.3)),
        ("step0/nodelay", _step(), 0.0, DiracKernel(), (4.0 / 3.0, 3.0)),
        ("step1e3/delay", _step(), 1e3, expk, (4.0 / 3.0, 3.0)),
    ]
    details, ok = {}, True
    for name, model, eps, kernel, band in configs:
        kd, ad = {}, {}
        for n in (512, 1024):
            p = _params(n)
            st = solve_steady(model, eps, p)
            op = assemble(st, model, kernel, eps, p)
            kd[n] = kernel_direction_defect(op, st)
            ad[n] = constants_adjoint_defect(op)
        dx = _params(512).dx
        ratio = kd[512] / kd[1024] if kd[1024] > 1e-14 else 2.0
        entry = {"kernel_defect_512": kd[512], "kernel_bound": 2.5 * dx,
                 "halving_ratio": ratio, "adjoint_defect_512": ad[512]}
        details[name] = entry
        ok &= kd[512] <= 2.5 * dx and kd[1024] <= 2.5 * _params(1024).dx
        ok &= band[0] <= ratio <= band[1]
        ok &= ad[512] <= 1e-10 and ad[1024] <= 1e-10
    return CriterionResult("linearization_structure", "kernel/adjoint structure", ok, details)


_GAP_CONFIGS = [
    ("constant", ConstantRate(1.0), 1.0),
    ("smooth/eps=1e2", SmoothRate(1.0, 2.0, 1.0, 1.0), 1e2),
    ("smooth/eps=1e3", SmoothRate(1.0, 2.0, 1.0, 1.0), 1e3),
    ("smooth/eps=1e4", SmoothRate(1.0, 2.0, 1.0, 1.0), 1e4),
    ("step/eps=0", StepRate(0.5, 0.25, 1.0), 0.0),
    ("step/eps=1e3", StepRate(0.5, 0.25, 1.0), 1e3),
]


def criterion_spectral_gap() -> CriterionResult:
    """Near-zero leading mode (|lambda0| <= 1e-2), positive gap, and gap
    stability under grid doubling (< 5% change) on all configurations."""
    details, ok = {}, True
    for name, model, eps in _GAP_CONFIGS:
        gaps, zme = {}, {}
        for n in (512, 1024):
            p = _params(n)
            st = solve_steady(model, eps, p)
            rep = compute_spectrum(assemble(st, model, DiracKernel(), eps, p))
            gaps[n], zme[n] = rep.gap, rep.zero_mode_error
        change = abs(gaps[1024] - gaps[512]) / gaps[512]
        details[name] = {"zero_mode_error": zme[512], "gap_512": gaps[512],
                         "gap_1024": gaps[1024], "rel_change": change}
        ok &= zme[512] <= 1e-2 and gaps[512] > 0 and change < 0.05
    return CriterionResult("spectral_gap", "spectral gap", ok, details)


def criterion_decay_matches_gap() -> CriterionResult:
    """Perturbed runs at amplitude 0.05 on flagged regimes decay with
    negative fitted rate, r2 >= 0.9, and |alpha_fit + gap| / gap <= 0.15."""
    details, ok = {}, True
    for name, model, eps in _GAP_CONFIGS:
        p = _params()
        st = solve_steady(model, eps, p)
        gap = compute_spectrum(assemble(st, model, DiracKernel(), eps, p)).gap
        fit, _ = decay_experiment(model, DiracKernel(), eps, p, 0.05)
        rel = abs(fit.alpha + gap) / gap
        details[name] = {"alpha_fit": fit.alpha, "r2": fit.r2, "gap": gap,
                         "rel_mismatch": rel}
        ok &= fit.alpha < 0 and fit.r2 >= 0.9 and rel <= 0.15
    return CriterionResult("decay_matches_gap", "nonlinear decay matches gap", ok, details)


def criterion_closure_contraction(seed: int = 7) -> CriterionResult:
    """Path-to-discharge map contraction: max ratio < 1 over 100 sampled
    pairs at horizon 0.05 on constant and strong-connectivity smooth rates;
    exactly zero for the constant rate."""
    p = _params()
    f0 = np.exp(-p.grid())
    r_const = contraction_probe(ConstantRate(1.0), 1.0, f0, 0.05, 100, p, seed=seed)
    details = {"constant": r_const}
    ok = r_const == 0.0
    for eps in (10.0, 100.0, 1000.0):
        r = contraction_probe(_smooth(), eps, f0, 0.05, 100, p, seed=seed)
        details[f"smooth/eps={eps:g}"] = r
        ok &= r < 1.0
    return CriterionResult("closure_contraction", "closure map contraction", ok, details)


def _step_runs(p: ModelParams):
    stp = _step()
    x = p.grid()
    block = (x < 1.0).astype(float)
    for eps in (0.0, 1e3):
        prof, m_star = discrete_stationary(stp, eps, p)
        yield f"steady/eps={eps:g}", stp, prof.copy(), eps, m_star, prof
        pert = np.clip(cosine_perturbation(prof, 0.05, x, p.x_max), 0.0, 1.0)
        yield f"perturbed/eps={eps:g}", stp, pert, eps, m_star, prof
        yield f"block/eps={eps:g}", stp, block.copy(), eps, None, prof


def criterion_step_bounds(collect=None) -> CriterionResult:
    """Every step-rate run keeps the density in [0, 1] and the activity in
    the threshold sandwich at every step."""
    p = _params()
    stp = _step()
    lo = 1.0 - stp.sigma_plus - 1e-8
    details, ok = {}, True
    for name, model, f0, eps, pre, prof in _step_runs(p):
        traj = run(f0, model, DiracKernel(), eps, p, reference=prof, prehistory=pre)
        m_lo, m_hi = float(traj.m[1:].min()), float(traj.m[1:].max())
        good = (traj.f_min >= 0.0 and traj.f_max <= 1.0 + 1e-10
                and m_lo >= lo and m_hi <= 1.0 + 1e-8)
        details[name] = {"f_min": traj.f_min, "f_max": traj.f_max,
                         "m_min": m_lo, "m_max": m_hi, "ok": good}
        ok &= good
        if collect is not None:
            collect[name] = traj
    return CriterionResult("step_bounds", "step-rate sandwich", ok, details)


def criterion_delay_consistency() -> CriterionResult:
    """The no-delay path and a Dirac kernel produce identical series to
    1e-12, and a near-instantaneous exponential kernel stays within 1e-2 of
    the Dirac trajectory in L1."""
    p = _params()
    sm = _smooth()
    eps = 1e3
    prof, m_star = discrete_stationary(sm, eps, p)
    f0 = cosine_perturbation(prof, 0.05, p.grid(), p.x_max)
    t_none = run(f0.copy(), sm, None, eps, p, reference=prof, prehistory=m_star,
                 snapshot_stride=8)
    t_dirac = run(f0.copy(), sm, DiracKernel(), eps, p, reference=prof,
                  prehistory=m_star, snapshot_stride=8)
    series_diff = max(float(np.max(np.abs(t_none.m - t_dirac.m))),
                      float(np.max(np.abs(t_none.p - t_dirac.p))))
    fast = ExponentialKernel(lam=1e3, delta=100.0)
    t_fast = run(f0.copy(), sm, fast, eps, p, reference=prof, prehistory=m_star,
                 snapshot_stride=8)
    traj_diff = max(float(np.abs(a - b).sum() * p.dx)
                    for a, b in zip(t_dirac.snapshots, t_fast.snapshots))
    ok = series_diff <= 1e-12 and traj_diff <= 1e-2
    return CriterionResult("delay_consistency", "delay consistency", ok,
                           {"dirac_vs_nodelay": series_diff,
                            "exp1e3_vs_dirac_L1": traj_diff})


def criterion_dissipative_decay(seed: int = 7) -> CriterionResult:
    """Fitted envelopes of the transport-absorption semigroups: at most
    -0.9 (constant, unit rate), -0.4 (smooth defaults), -min(1, delta)+0.1
    (step with delta=1)."""
    p = _params()
    details, ok = {}, True
    st = solve_steady(ConstantRate(1.0), 1.0, p)
    env = semigroup_decay_probe(dissipative_part(st, ConstantRate(1.0), 1.0, p),
                                horizon=5.0, samples=100, seed=seed)
    details["constant"] = {"alpha": env.alpha, "bound": -0.9}
    ok &= env.alpha <= -0.9
    sm = _smooth()
    st = solve_steady(sm, 1e3, p)
    env = semigroup_decay_probe(dissipative_part(st, sm, 1e3, p),
                                horizon=5.0, samples=100, seed=seed)
    details["smooth"] = {"alpha": env.alpha, "bound": -0.4}
    ok &= env.alpha <= -0.4
    stp = _step()
    st = solve_steady(stp, 1e3, p)
    kern = ExponentialKernel(lam=2.0, delta=1.0)
    env = semigroup_decay_probe(dissipative_part(st, stp, 1e3, p, kernel=kern),
                                horizon=5.0, samples=100, seed=seed)
    bound = -min(1.0, kern.delta) + 0.1
    details["step_delta1"] = {"alpha": env.alpha, "bound": bound}
    ok &= env.alpha <= bound
    return CriterionResult("dissipative_decay", "dissipative-part decay", ok, details)


def emit_campaign_csvs(seed: int, out_dir: str | Path) -> list[Path]:
    """The deterministic CSV subset written by `verify`, used for the
    bit-reproducibility criterion."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    p = _params()
    sm = _smooth()

    prof, m_star = discrete_stationary(sm, 1e3, p)
    f0 = cosine_perturbation(prof, 0.05, p.grid(), p.x_max)
    traj = run(f0, sm, ExponentialKernel(lam=2.0, delta=1.0), 1e3, p,
               reference=prof, prehistory=m_star)
    written.append(write_csv(out_dir / "series.csv",
                             ["t", "m", "p", "mass", "dist_L1"],
                             zip(traj.t, traj.m, traj.p, traj.mass_raw, traj.dist)))

    st = solve_steady(sm, 1e3, p)
    rep = compute_spectrum(assemble(st, sm, DiracKernel(), 1e3, p))
    written.append(write_csv(out_dir / "spectrum.csv", ["re", "im"],
                             zip(rep.eigenvalues.real, rep.eigenvalues.imag)))

    rows = regime_sweep(sm, DiracKernel(), [1e2, 1e3], p, seed=seed)
    written.append(write_csv(
        out_dir / "regime.csv",
        ["eps", "M", "kappa", "zeta", "gap", "alpha_fit", "r2", "basin",
         "root_count", "flag", "error"],
        [(r.eps, r.m, r.kappa if r.kappa is not None else float("nan"), r.zeta,
          r.gap, r.alpha_fit, r.r2,
          r.basin if r.basin is not None else float("nan"),
          r.root_count, r.flag, r.error) for r in rows]))

    probe_rows = []
    f0e = np.exp(-p.grid())
    for eps in (10.0, 100.0):
        probe_rows.append(("contraction", eps,
                           contraction_probe(sm, eps, f0e, 0.05, 100, p, seed=seed)))
    env = semigroup_decay_probe(dissipative_part(st, sm, 1e3, p),
                                horizon=5.0, samples=50, seed=seed)
    probe_rows.append(("dissipative_alpha", 1e3, env.alpha))
    written.append(write_csv(out_dir / "probes.csv", ["probe", "eps", "value"],
                             probe_rows))
    return written


def criterion_reproducibility(seed: int = 7, work_dir: str | Path | None = None
                              ) -> CriterionResult:
    """Running the CSV-emitting campaign twice with one seed yields
    bit-identical files."""
    import tempfile
    base = Path(work_dir) if work_dir else Path(tempfile.mkdtemp(prefix="neuroage_repro_"))
    d1, d2 = base / "pass1", base / "pass2"
    files1 = emit_campaign_csvs(seed, d1)
    files2 = emit_campaign_csvs(seed, d2)
    details, ok = {}, True
    for f1, f2 in zip(files1, files2):
        same = f1.read_bytes() == f2.read_bytes()
        details[f1.name] = bool(same)
        ok &= same
    return CriterionResult("reproducibility", "bit reproducibility", ok, details)


ALL_CRITERIA = [
    ("1", criterion_mass_conservation, True),
    ("2", criterion_characteristics_oracle, False),
    ("3", criterion_steady_state, False),
    ("4", criterion_linearization_structure, False),
    ("5", criterion_spectral_gap, False),
    ("6", criterion_decay_matches_gap, False),
    ("7", criterion_closure_contraction, True),
    ("8", criterion_step_bounds, False),
    ("9", criterion_delay_consistency, False),
    ("10", criterion_dissipative_decay, True),
]


def run_verification(seed: int = 7, out_dir: str | Path | None = None,
                     echo=print) -> list[CriterionResult]:
    """Run every criterion, print one pass/fail line each, return results."""
    results = []
    for number, fn, takes_seed in ALL_CRITERIA:
        t0 = time.time()
        res = fn(seed) if takes_seed else fn()
        res.seconds = time.time() - t0
        results.append(res)
        if echo:
            echo(f"[{'PASS' if res.passed else 'FAIL'}] criterion {number}: "
                 f"{res.name} ({res.seconds:.1f}s)")
    t0 = time.time()
    res = criterion_reproducibility(seed, Path(out_dir) / "repro" if out_dir else None)
    res.seconds = time.time() - t0
    results.append(res)
    if echo:
        echo(f"[{'PASS' if res.passed else 'FAIL'}] criterion 11: "
             f"{res.name} ({res.seconds:.1f}s)")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        emit_campaign_csvs(seed, out_dir)
        write_json(out_dir / "verify_report.json", {
            "seed": seed,
            "criteria": [{"key": r.key, "name": r.name, "passed": r.passed,
                          "seconds": r.seconds, "details": r.details}
                         for r in results],
            "all_passed": all(r.passed for r in results),
        })
    return results
