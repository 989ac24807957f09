"""Experiment commands: clip-norm sweeps, the private-min-Lipschitz pipeline,
privacy-rate scaling studies, clipping-bias oracle suites and the hard-instance
demo. Every command is deterministic given (spec, master seed) and emits a
schema-stable CSV."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..clipping import (
    DiscreteVectorDistribution,
    bias_bound_corollary,
    bias_bound_lemma,
    clipping_bias_exact,
)
from ..lipschitz import LipschitzProfile, build_profile, percentile
from ..losses import (
    Dataset,
    Problem,
    QvSpec,
    hard_instance_problem,
    heavy_tailed_logistic_dataset,
    load_dataset_csv,
    logistic_problem,
    lower_bound_loss,
    planted_logistic_dataset,
    sample_Qv_many,
)
from ..optimizer import (
    DpSgdConfig,
    reference_minimum,
    run_dp_sgd,
    schedule_unconstrained_convex,
)
from ..privacy import PrivacyBudget, compute_phi, noise_variance, report_noisy_max
from .io import write_csv
from .spec import DEFAULT_REF_ETAS, ExperimentSpec, OracleFailure, SpecValidationError

# sub-stream tags so dataset generation, selection noise and runs never share draws
_TAG_PLANTED = 11
_TAG_HEAVY = 12
_TAG_RNMM = 13
_TAG_QV = 14
_TAG_BIAS = 15


@dataclass
class SweepReport:
    """Per-cell metrics plus the per-clip-norm best-over-eta aggregate."""

    metric_kind: str
    cells: list[tuple[float, float, int, float]]  # (tau, eta, seed, metric)
    rows: list[list]  # CSV rows (tau, tau_kind, eta_best, mean, std)


def _dataset_from_spec(spec: ExperimentSpec) -> tuple[Dataset, Dataset | None]:
    if spec.csv is not None:
        train = load_dataset_csv(spec.csv, append_bias=spec.append_bias)
        test = None
        if spec.test_csv is not None:
            test = load_dataset_csv(spec.test_csv, append_bias=spec.append_bias)
            if test.dim != train.dim:
                raise SpecValidationError("train/test feature dimensions differ")
        return train, test
    if spec.synthetic == "planted":
        rng = np.random.default_rng([spec.master_seed, _TAG_PLANTED])
        train = planted_logistic_dataset(
            spec.n, spec.dim, spec.classes, rng, spec.norm_low, spec.norm_high
        )
    elif spec.synthetic == "heavy":
        rng = np.random.default_rng([spec.master_seed, _TAG_HEAVY])
        train = heavy_tailed_logistic_dataset(
            spec.n, spec.dim, spec.classes, spec.tail_k, rng
        )
    else:
        raise SpecValidationError("provide --csv PATH or --synthetic {planted,heavy}")
    if spec.append_bias:
        train = train.with_bias()
    return train, None


def _build_problem(spec: ExperimentSpec) -> tuple[Problem, dict]:
    train, test = _dataset_from_spec(spec)
    m = train.num_classes if spec.csv is not None else spec.classes
    if test is not None:
        m = max(m, test.num_classes)
    problem = logistic_problem(train, m)
    if spec.batch > train.n:
        raise SpecValidationError(f"batch {spec.batch} exceeds dataset size {train.n}")
    meta = {
        "m": m,
        "feature_dim": train.dim,
        "test": test,
        "metric": "accuracy" if test is not None else "suboptimality",
    }
    return problem, meta


def _metric_value(problem: Problem, meta: dict, f_star: float | None, w: np.ndarray) -> float:
    if meta["metric"] == "accuracy":
        test: Dataset = meta["test"]
        scores = test.features @ w.reshape(meta["m"], meta["feature_dim"]).T
        return float(np.mean(np.argmax(scores, axis=1) == test.labels))
    return problem.objective(w) - f_star


def _reference(problem: Problem, spec: ExperimentSpec) -> tuple[np.ndarray, float]:
    # non-private baseline at 10x the private iteration budget
    return reference_minimum(
        problem, np.zeros(problem.dim), list(DEFAULT_REF_ETAS), 10 * spec.iterations
    )


def _sigma_sq_for(spec: ExperimentSpec, tau: float, n: int, dim: int) -> float:
    if spec.no_noise:
        return 0.0
    if math.isinf(tau):
        raise SpecValidationError("an infinite clip norm requires --no-noise")
    budget = PrivacyBudget(spec.epsilon, spec.delta, spec.nu)
    return noise_variance(
        spec.iterations, tau, n, budget, dim, expected_batch=spec.batch
    ).sigma_sq


def _best_over_eta(
    problem: Problem,
    meta: dict,
    spec: ExperimentSpec,
    tau: float,
    sigma_sq: float,
    f_star: float | None,
    epsilon_override: float | None = None,
) -> tuple[float, float, float, list[tuple[float, float, int, float]]]:
    """Run the eta grid x seeds at one clip norm; return the best eta's stats."""
    higher_better = meta["metric"] == "accuracy"
    cells = []
    stats = []
    for eta in spec.eta_grid:
        values = []
        for seed in spec.seeds:
            config = DpSgdConfig(
                T=spec.iterations,
                eta=eta,
                tau=tau,
                b=spec.batch,
                sigma_sq=sigma_sq,
                w0=np.zeros(problem.dim),
                seed=seed,
                domain=problem.domain,
            )
            result = run_dp_sgd(problem, config)
            value = _metric_value(problem, meta, f_star, result.w_priv)
            values.append(value)
            cells.append((tau, eta, seed, value))
        arr = np.array(values)
        stats.append((eta, float(arr.mean()), float(arr.std())))
    key = (lambda s: s[1]) if higher_better else (lambda s: -s[1])
    eta_best, mean_best, std_best = max(stats, key=key)
    return eta_best, mean_best, std_best, cells


def resolve_candidates(
    tokens: tuple[str, ...], profile: LipschitzProfile
) -> list[tuple[str, str, float]]:
    """Map candidate tokens to (token, kind, clip norm).

    "pQ" resolves against the Lipschitz profile's nearest-rank percentile Q,
    "inf" is the no-clipping sentinel, anything else parses as an absolute
    value.
    """
    if not tokens:
        raise SpecValidationError("clip candidate list must be nonempty")
    out = []
    for token in tokens:
        t = token.strip()
        if t.lower() in ("inf", "infinity"):
            out.append((t, "infinite", math.inf))
            continue
        if t.lower().startswith("p"):
            try:
                q = float(t[1:])
            except ValueError:
                raise SpecValidationError(f"bad percentile token: {token!r}")
            out.append((t, "percentile", percentile(profile, q)))
            continue
        try:
            value = float(t)
        except ValueError:
            raise SpecValidationError(f"bad clip candidate: {token!r}")
        if value <= 0:
            raise SpecValidationError(f"clip candidates must be positive: {token!r}")
        out.append((t, "absolute", value))
    return out


def cmd_sweep_clip(spec: ExperimentSpec) -> SweepReport:
    """Best-over-eta metric per clip-norm candidate, averaged over seeds."""
    problem, meta = _build_problem(spec)
    profile = build_profile(problem)
    candidates = resolve_candidates(spec.clip_candidates, profile)
    f_star = None
    if meta["metric"] == "suboptimality":
        _, f_star = _reference(problem, spec)
    rows = []
    all_cells = []
    for token, kind, tau in candidates:
        sigma_sq = _sigma_sq_for(spec, tau, problem.n, problem.dim)
        eta_best, mean_best, std_best, cells = _best_over_eta(
            problem, meta, spec, tau, sigma_sq, f_star
        )
        rows.append([tau, kind, eta_best, mean_best, std_best])
        all_cells.extend(cells)
    write_csv(spec.out, ["tau", "tau_kind", "eta_best", "mean_metric", "std_metric"], rows)
    print(f"sweep-clip: {len(rows)} clip norms -> {spec.out} ({meta['metric']})")
    return SweepReport(metric_kind=meta["metric"], cells=all_cells, rows=rows)


def cmd_rnmm_pipeline(spec: ExperimentSpec) -> dict:
    """Privately select the minimum Lipschitz constant, then run DP-SGD with it.

    The total budget splits additively: eps_rnmm for selection, the remainder
    for DP-SGD. Reports the selected clip norm next to the non-private G_min
    baseline.
    """
    if spec.eps_rnmm is None:
        raise SpecValidationError("rnmm-pipeline requires --eps-rnmm")
    if math.isinf(spec.eps_rnmm):
        eps_dpsgd = spec.epsilon
    else:
        if not 0 < spec.eps_rnmm < spec.epsilon:
            raise SpecValidationError("need 0 < eps_rnmm < eps_total")
        eps_dpsgd = spec.epsilon - spec.eps_rnmm
    problem, meta = _build_problem(spec)
    profile = build_profile(problem)
    clamp = spec.rnmm_clamp if spec.rnmm_clamp is not None else percentile(profile, 99.9)
    if clamp <= 0:
        raise SpecValidationError("rnmm clamp bound must be positive")
    clamped = np.minimum(problem.lipschitz, clamp)
    rng = np.random.default_rng([spec.master_seed, _TAG_RNMM])
    selected = report_noisy_max(-clamped, spec.eps_rnmm, clamp, rng)
    tau_selected = float(clamped[selected])
    tau_oracle = profile.minimum

    run_spec = ExperimentSpec(**{**spec.__dict__, "epsilon": eps_dpsgd})
    f_star = None
    if meta["metric"] == "suboptimality":
        _, f_star = _reference(problem, spec)
    _, metric_with, _, _ = _best_over_eta(
        problem, meta, run_spec, tau_selected,
        _sigma_sq_for(run_spec, tau_selected, problem.n, problem.dim), f_star,
    )
    _, metric_without, _, _ = _best_over_eta(
        problem, meta, run_spec, tau_oracle,
        _sigma_sq_for(run_spec, tau_oracle, problem.n, problem.dim), f_star,
    )
    report = {
        "eps_total": spec.epsilon,
        "eps_rnmm": spec.eps_rnmm,
        "eps_dpsgd": eps_dpsgd,
        "tau_selected": tau_selected,
        "tau_oracle": tau_oracle,
        "metric_with": metric_with,
        "metric_without": metric_without,
    }
    header = list(report.keys())
    write_csv(spec.out, header, [[report[k] for k in header]])
    print(
        f"rnmm-pipeline: tau_selected={tau_selected:.6g} (oracle {tau_oracle:.6g}) "
        f"-> {spec.out}"
    )
    return report


def cmd_phi_scaling(spec: ExperimentSpec) -> list[list]:
    """Median convex risk of the heavy-tailed synthetic problem per dataset size.

    For each n the clip norm and step size come from the unconstrained convex
    schedule, with the moment bound G estimated non-privately from the
    empirical k-th moment of the per-sample constants.
    """
    if not spec.n_list:
        raise SpecValidationError("phi-scaling requires a nonempty n list")
    budget = PrivacyBudget(spec.epsilon, spec.delta, spec.nu)
    k = spec.moment_k
    rows = []
    for n in spec.n_list:
        rng = np.random.default_rng([spec.master_seed, _TAG_HEAVY, n])
        train = heavy_tailed_logistic_dataset(n, spec.dim, spec.classes, spec.tail_k, rng)
        if spec.append_bias:
            train = train.with_bias()
        problem = logistic_problem(train, spec.classes)
        if spec.batch > n:
            raise SpecValidationError(f"batch {spec.batch} exceeds n={n}")
        phi = compute_phi(n, problem.dim, budget)
        g_emp = float(np.mean(problem.lipschitz**k) ** (1.0 / k))
        tau, eta = _unconstrained_schedule(g_emp, spec, phi, k)
        sigma_sq = noise_variance(
            spec.iterations, tau, n, budget, problem.dim, expected_batch=spec.batch
        ).sigma_sq
        _, f_star = _reference(problem, spec)
        risks = []
        for seed in spec.seeds:
            config = DpSgdConfig(
                T=spec.iterations,
                eta=eta,
                tau=tau,
                b=spec.batch,
                sigma_sq=sigma_sq,
                w0=np.zeros(problem.dim),
                seed=seed,
                domain=problem.domain,
            )
            result = run_dp_sgd(problem, config)
            risks.append(problem.objective(result.w_priv) - f_star)
        rows.append([n, phi, k, float(np.median(risks))])
    write_csv(spec.out, ["n", "phi", "k", "median_risk"], rows)
    print(f"phi-scaling: {len(rows)} dataset sizes -> {spec.out}")
    return rows


def _unconstrained_schedule(g: float, spec: ExperimentSpec, phi: float, k: float):
    return schedule_unconstrained_convex(
        g, spec.gamma, spec.growth_c, spec.iterations, phi, k
    )


def cmd_bias_oracle(spec: ExperimentSpec) -> bool:
    """Check exact bias <= moment/tail bound <= Markov bound on random instances.

    Emits one CSV row per (distribution, p, tau) with both margins; any
    negative margin beyond -1e-9 fails the oracle (exit code 2).
    """
    if spec.count < 1:
        raise SpecValidationError("count must be >= 1")
    if any(p <= 1 for p in spec.p_list):
        raise SpecValidationError("all moment orders p must exceed 1")
    rng = np.random.default_rng([spec.master_seed, _TAG_BIAS])
    tau_fractions = np.array([0.05, 0.15, 0.3, 0.5, 0.75, 1.0, 1.1])
    rows = []
    worst = math.inf
    for dist_id in range(spec.count):
        m = int(rng.integers(2, 7))
        d = int(rng.integers(1, 4))
        scale = math.exp(rng.uniform(-1.0, 2.0))
        vectors = rng.normal(0.0, scale, size=(m, d))
        probs = rng.random(m) + 0.05
        probs /= probs.sum()
        dist = DiscreteVectorDistribution(vectors=vectors, probs=probs)
        max_norm = float(dist.norms().max())
        for p in spec.p_list:
            for frac in tau_fractions:
                tau = max(frac * max_norm, 1e-9)
                exact = clipping_bias_exact(dist, tau)
                lemma = bias_bound_lemma(dist, tau, p)
                corollary = bias_bound_corollary(dist, tau, p)
                m_lemma = lemma - exact
                m_cor = corollary - lemma
                worst = min(worst, m_lemma, m_cor)
                rows.append([dist_id, p, tau, exact, lemma, corollary, m_lemma, m_cor])
    write_csv(
        spec.out,
        ["dist_id", "p", "tau", "bias_exact", "lemma_bound",
         "corollary_bound", "margin_lemma", "margin_corollary"],
        rows,
    )
    passed = worst >= -1e-9
    status = "PASS" if passed else "FAIL"
    print(f"bias-oracle: {len(rows)} checks, worst margin {worst:.3e} [{status}]")
    if not passed:
        raise OracleFailure(f"bias bound chain violated: worst margin {worst:.3e}")
    return True


def cmd_lower_bound_demo(spec: ExperimentSpec) -> list[list]:
    """Verify the two-atom hard instance numerically, then run DP-SGD on it.

    Checks: the sampler's mean matches its closed form, the ERM minimizer is
    v/||v|| (dense grid at d=2), the gradient-moment bound holds under
    two-atom enumeration and suboptimality grows linearly outside the unit
    ball. The achieved risk is reported next to phi^(1-1/k) for information
    only.
    """
    d = spec.dim
    if d % 2 != 0:
        raise SpecValidationError("lower-bound-demo requires an even dimension")
    k = spec.moment_k
    rng = np.random.default_rng([spec.master_seed, _TAG_QV])
    v = np.zeros(d)
    v[rng.permutation(d)[: d // 2]] = 1.0
    qv = QvSpec(v=v, p=spec.qv_p, k=k)
    xs = sample_Qv_many(qv, spec.n, rng)
    x_bar = xs.mean(axis=0)
    budget = PrivacyBudget(spec.epsilon, spec.delta, spec.nu)
    phi = compute_phi(spec.n, d, budget)
    phi_scale = phi ** (1.0 - 1.0 / k)

    if float(np.linalg.norm(x_bar)) == 0.0:
        # every draw hit the zero atom, so the objective is identically zero
        rows = [[seed, 0.0, phi_scale, 1] for seed in spec.seeds]
        write_csv(spec.out, ["seed", "risk", "phi_power_scale", "degenerate"], rows)
        print("lower-bound-demo: degenerate all-zero dataset (objective is 0)")
        return rows

    _verify_hard_instance(qv, xs, rng)

    problem = hard_instance_problem(xs)
    w_star = v / np.linalg.norm(v)
    f_star = problem.objective(w_star)
    g = 3.0 * float(np.linalg.norm(v))
    tau, eta = _unconstrained_schedule(g, spec, phi, k)
    if spec.batch > spec.n:
        raise SpecValidationError(f"batch {spec.batch} exceeds n={spec.n}")
    sigma_sq = noise_variance(
        spec.iterations, tau, spec.n, budget, d, expected_batch=spec.batch
    ).sigma_sq
    rows = []
    for seed in spec.seeds:
        config = DpSgdConfig(
            T=spec.iterations,
            eta=eta,
            tau=tau,
            b=spec.batch,
            sigma_sq=sigma_sq,
            w0=np.zeros(d),
            seed=seed,
        )
        result = run_dp_sgd(problem, config)
        rows.append([seed, problem.objective(result.w_priv) - f_star, phi_scale, 0])
    write_csv(spec.out, ["seed", "risk", "phi_power_scale", "degenerate"], rows)
    print(
        f"lower-bound-demo: verified instance, {len(rows)} runs -> {spec.out} "
        f"(phi^(1-1/k) = {phi_scale:.4g})"
    )
    return rows


def _verify_hard_instance(qv: QvSpec, xs: np.ndarray, rng: np.random.Generator) -> None:
    v = qv.v
    d = v.size
    v_norm = float(np.linalg.norm(v))
    w_star = v / v_norm
    x_bar = xs.mean(axis=0)
    x_bar_norm = float(np.linalg.norm(x_bar))

    # sampler mean against its closed form, 4-sigma Monte-Carlo band
    draws = sample_Qv_many(qv, 100_000, rng)
    expected = qv.p ** (1.0 - 1.0 / qv.k) * v
    total_var = qv.p ** (1.0 - 2.0 / qv.k) * (1.0 - qv.p) * v_norm**2
    band = 4.0 * math.sqrt(total_var / draws.shape[0])
    deviation = float(np.linalg.norm(draws.mean(axis=0) - expected))
    if deviation > band:
        raise OracleFailure(
            f"sampler mean off by {deviation:.3e} (4-sigma band {band:.3e})"
        )

    # dense-grid minimizer check (2-D only)
    if d == 2:
        grid_best = _grid_argmin_2d(x_bar, resolution=1e-3, extent=1.5)
        err = float(np.linalg.norm(grid_best - w_star))
        if err > 2e-3:
            raise OracleFailure(f"grid argmin {grid_best} is {err:.3e} from v/||v||")

    # gradient moment bound by enumeration over the two atoms
    heavy = qv.heavy_atom
    bound = (3.0 * v_norm) ** qv.k
    for _ in range(100):
        w = rng.normal(0.0, 2.0, size=d)
        _, sub = lower_bound_loss(w, heavy)
        moment = qv.p * float(np.linalg.norm(sub)) ** qv.k
        if moment > bound * (1.0 + 1e-12):
            raise OracleFailure("gradient moment bound violated")

    # linear growth outside the unit ball
    f_star = -x_bar_norm
    for _ in range(100):
        w = rng.normal(size=d)
        w *= (1.0 + 4.0 * rng.random()) / np.linalg.norm(w)  # norms in (1, 5]
        value = -float(w @ x_bar) + 2.0 * x_bar_norm * (float(np.linalg.norm(w)) - 1.0)
        slack = value - f_star - x_bar_norm * (float(np.linalg.norm(w)) - 1.0)
        if slack < -1e-9:
            raise OracleFailure("sharpness inequality violated outside the unit ball")


def _grid_argmin_2d(x_bar: np.ndarray, resolution: float, extent: float) -> np.ndarray:
    """Argmin of the averaged hard-instance loss over a regular 2-D grid.

    Evaluates in row blocks to bound memory.
    """
    coords = np.arange(-extent, extent + resolution / 2, resolution)
    x_bar_norm = float(np.linalg.norm(x_bar))
    best_val = math.inf
    best_w = np.zeros(2)
    block = 256
    for start in range(0, coords.size, block):
        xs0 = coords[start : start + block]
        X, Y = np.meshgrid(xs0, coords, indexing="ij")
        R = np.sqrt(X * X + Y * Y)
        vals = -(X * x_bar[0] + Y * x_bar[1]) + 2.0 * x_bar_norm * np.maximum(R - 1.0, 0.0)
        idx = np.unravel_index(np.argmin(vals), vals.shape)
        if vals[idx] < best_val:
            best_val = float(vals[idx])
            best_w = np.array([X[idx], Y[idx]])
    return best_w


COMMANDS = {
    "sweep-clip": cmd_sweep_clip,
    "rnmm-pipeline": cmd_rnmm_pipeline,
    "phi-scaling": cmd_phi_scaling,
    "bias-oracle": cmd_bias_oracle,
    "lower-bound-demo": cmd_lower_bound_demo,
}
