"""Experiment drivers: seeded random instances, gap comparisons, spectrum
scans, the inequality verification suite, and Cheeger-witness reports.

Randomness comes from a counter-based Philox stream keyed by the config
seed; each trial uses an independent jump of the stream, so reports are
reproducible across platforms and independent of execution order.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import classical as cl
from . import davies as dv
from . import gaps as gp
from . import operators as op
from . import spectral as sp
from .errors import ConfigError

MAX_QUBITS = 8
SANDWICH_TOL = 1e-9

_SMALL_PRIMES = (3, 5, 7)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent deterministic stream for one trial."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(trial))


@dataclass
class ExperimentConfig:
    """Validated experiment configuration (flags override file fields)."""

    model: op.ModelSpec | None = None
    betas: tuple = (1.0,)
    rate_kind: str = "glauber"
    rate_table: tuple = ()
    jumps: tuple | None = None
    seed: int | None = None
    trials: int = 20
    qubits: tuple = (2, 3)
    tol_scale: float = 1.0
    cluster_tol: float | None = None
    graph: tuple = ()
    order: int = 2
    rotation_samples: int = 8
    out: str | None = None
    format: str = "json"

    _ALLOWED = {"model", "generator", "seed", "trials", "qubits", "tolerances",
                "graph", "order", "rotation_samples", "out", "format"}

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - cls._ALLOWED
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        cfg = cls()
        if "model" in doc and doc["model"] is not None:
            try:
                cfg.model = op.parse_model(doc["model"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        gdoc = doc.get("generator", {})
        unknown = set(gdoc) - {"beta", "betas", "rate", "jumps"}
        if unknown:
            raise ConfigError(f"unknown generator fields {sorted(unknown)}")
        if "betas" in gdoc:
            cfg.betas = tuple(float(b) for b in gdoc["betas"])
        elif "beta" in gdoc:
            cfg.betas = (float(gdoc["beta"]),)
        rdoc = gdoc.get("rate", {})
        if set(rdoc) - {"kind", "table"}:
            raise ConfigError(f"unknown rate fields {sorted(set(rdoc) - {'kind', 'table'})}")
        cfg.rate_kind = rdoc.get("kind", "glauber")
        cfg.rate_table = tuple((float(w), float(g)) for w, g in rdoc.get("table", []))
        if cfg.rate_kind not in dv.RATE_KINDS:
            raise ConfigError(f"unknown rate kind {cfg.rate_kind!r}")
        if "jumps" in gdoc:
            cfg.jumps = tuple(
                j if isinstance(j, str) else op.complex_matrix_from_json(j)
                for j in gdoc["jumps"]
            )
        if "seed" in doc and doc["seed"] is not None:
            cfg.seed = int(doc["seed"])
        if "trials" in doc:
            cfg.trials = int(doc["trials"])
            if cfg.trials < 1:
                raise ConfigError("trials must be positive")
        if "qubits" in doc:
            q = doc["qubits"]
            cfg.qubits = tuple(int(x) for x in (q if isinstance(q, list) else [q]))
        tdoc = doc.get("tolerances", {})
        if set(tdoc) - {"cluster", "scale"}:
            raise ConfigError(f"unknown tolerance fields {sorted(set(tdoc) - {'cluster', 'scale'})}")
        if "cluster" in tdoc:
            cfg.cluster_tol = float(tdoc["cluster"])
        if "scale" in tdoc:
            cfg.tol_scale = float(tdoc["scale"])
        if "graph" in doc:
            cfg.graph = tuple((int(a), int(b)) for a, b in doc["graph"])
        if "order" in doc:
            cfg.order = int(doc["order"])
        if "rotation_samples" in doc:
            cfg.rotation_samples = int(doc["rotation_samples"])
        cfg.out = doc.get("out")
        cfg.format = doc.get("format", "json")
        if cfg.format not in ("json", "csv"):
            raise ConfigError(f"format must be 'json' or 'csv', got {cfg.format!r}")
        cfg.validate()
        return cfg

    def validate(self):
        for n in self.qubits:
            if n < 1:
                raise ConfigError(f"qubit count must be positive, got {n}")
            if n > MAX_QUBITS:
                raise ConfigError(
                    f"n={n} exceeds the size guard of {MAX_QUBITS} qubits "
                    "(superoperator dimensions grow as 4^n)"
                )
        if self.model is not None and self.model.n > MAX_QUBITS:
            raise ConfigError(f"model has n={self.model.n} > {MAX_QUBITS}")
        if self.model is None and self.seed is None:
            raise ConfigError("random-model experiments require an explicit seed")
        if self.tol_scale <= 0:
            raise ConfigError("tolerance scale must be positive")

    def describe(self) -> dict:
        return {
            "model": None if self.model is None else self.model.kind,
            "betas": list(self.betas),
            "rate": self.rate_kind,
            "seed": self.seed,
            "trials": self.trials,
            "qubits": list(self.qubits),
            "tol_scale": self.tol_scale,
        }


def random_zz_field_instance(n: int, rng: np.random.Generator) -> np.ndarray:
    """ZZ background on all pairs plus a uniform random X field.

    Couplings and fields are uniform on [-1, 1]; the field makes the
    spectrum generically simple and free of 3-term progressions.
    """
    terms = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            s = ["I"] * n
            s[i - 1] = s[j - 1] = "Z"
            terms.append((rng.uniform(-1, 1), "".join(s)))
    H = op.build_pauli_hamiltonian(terms, n=n)
    h = rng.uniform(-1, 1, size=n)
    return op.build_field_perturbation(H, op.PAULI["X"], h)


def _build_generator_for(cfg: ExperimentConfig, H: np.ndarray, beta: float) -> dv.DaviesGenerator:
    return dv.build_generator(
        H, beta=beta, rate=cfg.rate_kind,
        rate_table=cfg.rate_table or None,
        jumps=cfg.jumps, cluster_tol=cfg.cluster_tol,
    )


def _instance_for_trial(cfg: ExperimentConfig, trial: int):
    """(H, n, beta, rng) for one trial, cycling qubit counts and betas."""
    rng = trial_rng(cfg.seed if cfg.seed is not None else 0, trial)
    beta = cfg.betas[trial % len(cfg.betas)]
    if cfg.model is not None:
        return op.build_model(cfg.model), cfg.model.n, beta, rng
    n = cfg.qubits[trial % len(cfg.qubits)]
    return random_zz_field_instance(n, rng), n, beta, rng


# ---------------------------------------------------------------------------
# gap / compare
# ---------------------------------------------------------------------------


def run_gap(cfg: ExperimentConfig) -> dict:
    """Gap report(s) for a fixed model, one per beta."""
    if cfg.model is None:
        raise ConfigError("the gap command needs an explicit model")
    H = op.build_model(cfg.model)
    rows = []
    for beta in cfg.betas:
        t0 = time.perf_counter()
        gen = _build_generator_for(cfg, H, beta)
        report = gp.spectral_gap_full(gen)
        row = report.to_json()
        row["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
        rows.append(row)
    return {"kind": "gap", "config": cfg.describe(), "rows": rows,
            "violations": 0, "timestamp": _now()}


def run_comparison(cfg: ExperimentConfig) -> dict:
    """Quantum/diagonal/classical gap comparison rows over seeded instances."""
    rows = []
    violations = 0
    for trial in range(cfg.trials):
        t0 = time.perf_counter()
        H, n, beta, rng = _instance_for_trial(cfg, trial)
        gen = _build_generator_for(cfg, H, beta)
        ap = sp.find_proper_ap(gen.levels.values)
        D = max(ap.length, 1)
        # Hermitian-restricted gaps are recomputed on the smaller instances
        # only; they repeat the full minimization in a real basis and would
        # dominate the sweep at n = 4.
        report = gp.spectral_gap_full(gen, hermitian_cap=64)
        lam_full, lam_diag = report.lambda_full, report.lambda_diag
        simple = bool(np.all(gen.levels.multiplicities == 1))
        chain = cl.extract_chain(gen)
        lam_cl = cl.classical_gap(chain)
        if not simple and cfg.rotation_samples > 0:
            for _ in range(cfg.rotation_samples):
                cand = cl.extract_chain(gen, basis=cl.rotated_eigenbasis(gen, rng))
                lam_cl = min(lam_cl, cl.classical_gap(cand))
        ergodic = report.ergodic and not math.isinf(lam_diag)
        tol = SANDWICH_TOL * cfg.tol_scale
        verdict = bool(
            ergodic
            and lam_diag >= lam_full - tol
            and lam_full >= lam_diag / (2.0 * D) - tol
        )
        if ergodic and not verdict:
            violations += 1
        rows.append({
            "trial": trial,
            "seed": cfg.seed,
            "n": n,
            "beta": beta,
            "lambda_full": gp._encode_gap(lam_full),
            "lambda_diag": gp._encode_gap(lam_diag),
            "lambda_cl": gp._encode_gap(lam_cl),
            "D": D,
            "minimizing_omega": report.minimizing_omega,
            "ratio": (lam_full / lam_diag) if ergodic and lam_diag > 0 else None,
            "verdict": verdict,
            "ergodic": ergodic,
            "simple_spectrum": simple,
            "residuals": dict(sorted(report.residuals.items())),
            "flags": list(report.flags),
            "wall_ms": 1000.0 * (time.perf_counter() - t0),
        })
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    return {
        "kind": "comparison",
        "config": cfg.describe(),
        "rows": rows,
        "summary": {
            "ergodic_rows": sum(1 for r in rows if r["ergodic"]),
            "violations": violations,
            "min_ratio": min(ratios) if ratios else None,
            "max_ratio": max(ratios) if ratios else None,
        },
        "violations": violations,
        "timestamp": _now(),
    }


# ---------------------------------------------------------------------------
# ap-scan
# ---------------------------------------------------------------------------


def _ap_case_stats(spectra, value_tol=None) -> dict:
    three_ap = 0
    repeated = 0
    examples = []
    total = 0
    for spec in spectra:
        total += 1
        spec = np.asarray(spec, dtype=float)
        vt, st = sp.default_ap_tols(spec)
        if value_tol is not None:
            vt = value_tol
        rep = sp.find_proper_ap(spec, value_tol=vt, sep_tol=st)
        has_rep = sp.distinct_values(spec, vt).size < spec.size
        if rep.length >= 3:
            three_ap += 1
            if len(examples) < 3:
                examples.append(rep.to_json())
        if has_rep:
            repeated += 1
    return {
        "trials": total,
        "three_ap_count": three_ap,
        "repeated_eigenvalue_count": repeated,
        "three_ap_fraction": three_ap / total if total else 0.0,
        "repeated_fraction": repeated / total if total else 0.0,
        "examples": examples,
    }


def run_ap_scan(cfg: ExperimentConfig) -> dict:
    """Fractions of random instances whose spectra show 3-term progressions
    or repeated eigenvalues, for several structured perturbation families."""
    if cfg.seed is None:
        raise ConfigError("ap-scan requires a seed")
    n = max(cfg.qubits)
    T = cfg.trials
    cases = {}

    def spectra_for(builder):
        out = []
        for t in range(T):
            rng = trial_rng(cfg.seed, t)
            out.append(builder(rng))
        return out

    cases["z-field"] = _ap_case_stats(spectra_for(
        lambda rng: np.linalg.eigvalsh(
            op.build_field_perturbation(np.zeros((2**n, 2**n)), op.PAULI["Z"],
                                        rng.uniform(-1, 1, size=n)))))

    cases["field-perturbed"] = _ap_case_stats(spectra_for(
        lambda rng: np.linalg.eigvalsh(random_zz_field_instance(n, rng))))

    def higher_order(rng):
        from itertools import combinations
        terms = []
        for subset in combinations(range(1, n + 1), min(cfg.order, n)):
            s = ["I"] * n
            for i in subset:
                s[i - 1] = "X"
            terms.append((rng.uniform(-1, 1), "".join(s)))
        base = [(1.0, "Z" * n)] if n >= 2 else []
        return np.linalg.eigvalsh(op.build_pauli_hamiltonian(terms + base, n=n))

    cases["higher-order"] = _ap_case_stats(spectra_for(higher_order))

    edges = cfg.graph or (
        tuple((i, i + 1) for i in range(1, n)) + (((n, 1),) if n > 2 else ())
    )

    def edge_quadratic(rng):
        terms = []
        for (a, b) in edges:
            s = ["I"] * n
            s[a - 1] = s[b - 1] = "X"
            terms.append((rng.uniform(-1, 1), "".join(s)))
        return np.linalg.eigvalsh(op.build_pauli_hamiltonian(terms, n=n))

    cases["edge-quadratic"] = _ap_case_stats(spectra_for(edge_quadratic))

    ring_n = max((p for p in _SMALL_PRIMES if p <= max(cfg.qubits, default=5)), default=5)
    cases["xyz-ring"] = _ap_case_stats(spectra_for(
        lambda rng: op.xyz_ring_spectrum(rng.uniform(-2, 2),
                                         _nonzero_uniform(rng), ring_n)))

    return {"kind": "ap-scan", "config": cfg.describe(), "cases": cases,
            "violations": 0, "timestamp": _now()}


def _nonzero_uniform(rng, low=-2.0, high=2.0, floor=1e-3):
    x = rng.uniform(low, high)
    while abs(x) < floor:
        x = rng.uniform(low, high)
    return x


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    trials: int
    checks: int
    max_violation: float
    tol: float
    passed: bool
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "name": self.name, "trials": self.trials, "checks": self.checks,
            "max_violation": self.max_violation, "tol": self.tol,
            "passed": self.passed, "failures": self.failures,
        }


class _Suite:
    """Accumulates violations of one inequality family across instances."""

    def __init__(self, name: str, tol: float):
        self.name = name
        self.tol = tol
        self.trials = 0
        self.checks = 0
        self.worst = 0.0
        self.failures = []

    def add(self, violation: float, context: dict):
        self.checks += 1
        v = float(violation)
        if v > self.worst:
            self.worst = v
        if v > self.tol and len(self.failures) < 5:
            self.failures.append({**context, "violation": v})

    def result(self) -> SuiteResult:
        return SuiteResult(
            name=self.name, trials=self.trials, checks=self.checks,
            max_violation=self.worst, tol=self.tol,
            passed=self.worst <= self.tol, failures=self.failures,
        )


def _random_operator(rng, N):
    return rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))


def _random_in_omega(gen, rng, k):
    """Random operator supported on Bohr block k (eigenbasis mask projection)."""
    N = gen.dim
    f = np.zeros((N, N), dtype=complex)
    rows, cols = gen.pair_rows[k], gen.pair_cols[k]
    f[rows, cols] = rng.normal(size=rows.size) + 1j * rng.normal(size=rows.size)
    return gen.from_eigenbasis(f)


def run_verify(cfg: ExperimentConfig) -> dict:
    """Run every inequality/identity suite at its stated tolerance.

    Any suite exceeding tolerance marks the report as violated; the CLI
    turns that into a nonzero exit code.  Failure entries carry the trial
    seed and instance description needed to replay them in isolation.
    """
    ts = cfg.tol_scale
    suites = {
        "detailed-balance": _Suite("detailed-balance", 1e-10 * ts),
        "jump-symmetrization": _Suite("jump-symmetrization", 1e-12 * ts),
        "kms-reversibility": _Suite("kms-reversibility", 1e-9 * ts),
        "identity-kernel": _Suite("identity-kernel", 1e-10 * ts),
        "vomega-invariance": _Suite("vomega-invariance", 1e-10 * ts),
        "divergence-identity": _Suite("divergence-identity", 1e-9 * ts),
        "commutator-decomposition": _Suite("commutator-decomposition", 1e-9 * ts),
        "dirichlet-comparison": _Suite("dirichlet-comparison", 1e-9 * ts),
        "variance-comparison": _Suite("variance-comparison", 1e-9 * ts),
        "decomposition-additivity": _Suite("decomposition-additivity", 1e-9 * ts),
        "trace-inequality": _Suite("trace-inequality", 1e-10 * ts),
        "coherent-term": _Suite("coherent-term", 1e-10 * ts),
        "sandwich": _Suite("sandwich", SANDWICH_TOL * ts),
        "per-omega-bound": _Suite("per-omega-bound", 1e-9 * ts),
        "gap-cross-check": _Suite("gap-cross-check", 1e-9 * ts),
        "hermitian-equality": _Suite("hermitian-equality", 1e-9 * ts),
        "generator-psd": _Suite("generator-psd", 1e-9 * ts),
        "classical-reversibility": _Suite("classical-reversibility", 1e-10 * ts),
        "classical-correspondence": _Suite("classical-correspondence", 1e-9 * ts),
        "simple-spectrum-equality": _Suite("simple-spectrum-equality", 1e-9 * ts),
        "degenerate-minimization": _Suite("degenerate-minimization", 1e-9 * ts),
        "cheeger-chain": _Suite("cheeger-chain", 1e-9 * ts),
        "exit-rate-bound": _Suite("exit-rate-bound", 1e-9 * ts),
        "dimension-1-orbit": _Suite("dimension-1-orbit", 1e-9 * ts),
    }

    for trial in range(cfg.trials):
        H, n, beta, rng = _instance_for_trial(cfg, trial)
        gen = _build_generator_for(cfg, H, beta)
        ctx = {"trial": trial, "seed": cfg.seed, "n": n, "beta": beta}
        for s in suites.values():
            s.trials += 1
        _check_instance(suites, gen, H, rng, ctx)

    report = {s.name: s.result().to_json() for s in suites.values()}
    violations = sum(1 for r in report.values() if not r["passed"])
    return {"kind": "verify", "config": cfg.describe(), "suites": report,
            "violations": violations, "timestamp": _now()}


def _check_instance(suites, gen, H, rng, ctx):
    N = gen.dim
    gibbs = gen.gibbs
    levels = gen.levels
    bohr = gen.bohr

    suites["detailed-balance"].add(gen.db_residual, ctx)
    for S in gen.jumps:
        dev = min(float(np.abs(T - S.conj().T).max()) for T in gen.jumps)
        suites["jump-symmetrization"].add(dev, ctx)

    eye = np.eye(N)
    suites["identity-kernel"].add(
        float(np.abs(dv.apply_davies(gen, eye)).max()), ctx)

    for _ in range(10):
        f = _random_operator(rng, N)
        g = _random_operator(rng, N)
        scale = dv.tolerance_scale(gen, f)
        lhs = dv.kms_inner(gibbs, dv.apply_davies(gen, f), g)
        rhs = dv.kms_inner(gibbs, f, dv.apply_davies(gen, g))
        suites["kms-reversibility"].add(abs(lhs - rhs) / scale, ctx)

        e_def = dv.dirichlet_form(gen, f, "definitional")
        e_div = dv.dirichlet_form(gen, f, "divergence")
        suites["divergence-identity"].add(abs(e_def - e_div) / max(1.0, e_def), ctx)

        # additivity of Dirichlet form and variance over frequency components
        comps = [sp.project_component(f, om, levels, bohr=bohr) for om in bohr.omegas]
        suites["decomposition-additivity"].add(
            float(np.abs(sum(comps) - f).max()) / max(1.0, float(np.abs(f).max())), ctx)
        e_sum = sum(dv.dirichlet_form(gen, c) for c in comps)
        v_sum = sum(dv.variance(gibbs, c) for c in comps)
        suites["decomposition-additivity"].add(abs(e_sum - e_def) / max(1.0, e_def), ctx)
        v_f = dv.variance(gibbs, f)
        suites["decomposition-additivity"].add(abs(v_sum - v_f) / max(1.0, v_f), ctx)

        fh = f + f.conj().T
        suites["coherent-term"].add(
            dv.coherent_term_check(gen, H, fh) / dv.tolerance_scale(gen, fh), ctx)
        # for arbitrary f the pairing is real: imaginary part vanishes
        suites["coherent-term"].add(
            abs(dv.coherent_term_value(gen, H, f).imag) / scale, ctx)

        A = _random_operator(rng, N)
        B = _random_operator(rng, N)
        tscale = max(1.0, np.linalg.norm(f) ** 2,
                     np.linalg.norm(A) ** 2 + np.linalg.norm(B) ** 2)
        suites["trace-inequality"].add(
            -dv.trace_inequality_residual(A, B, f) / tscale, ctx)

    # Gap and chain suites presuppose KMS self-adjointness; with a broken
    # rate function the detailed-balance and reversibility suites above have
    # already failed and the generator matrices are not even Hermitian.
    if gen.db_residual > 1e-8:
        return

    # per-frequency structure
    spectrum = levels.values
    for k, om in enumerate(bohr.omegas):
        f = _random_in_omega(gen, rng, k)
        scale = dv.tolerance_scale(gen, f)
        Lf = dv.apply_davies(gen, f)
        back = sp.project_component(Lf, om, levels, bohr=bohr)
        suites["vomega-invariance"].add(float(np.abs(Lf - back).max()) / scale, ctx)

        phi = _random_operator(rng, N)
        suites["commutator-decomposition"].add(
            _commutator_decomposition_residual(gen, k, phi), ctx)

        if abs(om) > bohr.tol:
            g, h = dv.hermitianize_pair(f, om, gen.beta, levels, bohr=bohr)
            e_f = dv.dirichlet_form(gen, f)
            e_g = dv.dirichlet_form(gen, g)
            e_h = dv.dirichlet_form(gen, h)
            suites["dirichlet-comparison"].add(
                (e_g + e_h - 2.0 * e_f) / scale, {**ctx, "omega": float(om)})
            d_om = sp.ap_length_with_difference(spectrum, om, value_tol=bohr.tol)
            factor = max(1.0 / d_om, 1.0 - math.exp(-abs(gen.beta * om)))
            v_f, v_g, v_h = (dv.variance(gibbs, x) for x in (f, g, h))
            suites["variance-comparison"].add(
                (factor * v_f - v_g - v_h) / scale, {**ctx, "omega": float(om)})

    # gap-level checks
    report = gp.spectral_gap_full(gen)
    lam_full, lam_diag = report.lambda_full, report.lambda_diag
    if "cross_check" in report.residuals:
        suites["gap-cross-check"].add(report.residuals["cross_check"], ctx)
    for key in ("hermitian_full", "hermitian_diag"):
        if key in report.residuals:
            suites["hermitian-equality"].add(report.residuals[key], ctx)

    ap = sp.find_proper_ap(spectrum)
    D = max(ap.length, 1)
    if report.ergodic and not math.isinf(lam_diag):
        suites["sandwich"].add(lam_full - lam_diag, ctx)
        suites["sandwich"].add(lam_diag / (2.0 * D) - lam_full, ctx)
    for om, g_om in report.omega_gaps:
        if math.isinf(g_om) or abs(om) <= bohr.tol or math.isinf(lam_diag):
            continue
        suites["sandwich"].add(lam_full - g_om, ctx)
        d_om = sp.ap_length_with_difference(spectrum, om, value_tol=bohr.tol)
        factor = 0.5 * max(1.0 / d_om, 1.0 - math.exp(-abs(gen.beta * om)))
        suites["per-omega-bound"].add(
            factor * lam_diag - g_om, {**ctx, "omega": float(om)})
        basis = gp.subspace_basis(gen, om)
        M = gp.generator_matrix(gen, basis)
        lo = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
        suites["generator-psd"].add(-lo, {**ctx, "omega": float(om)})

    # classical embedding
    chain = cl.extract_chain(gen)
    suites["classical-reversibility"].add(chain.reversibility_residual(), ctx)
    lam_cl = cl.classical_gap(chain)
    simple = bool(np.all(levels.multiplicities == 1))
    if simple and not math.isinf(lam_diag):
        suites["simple-spectrum-equality"].add(
            abs(lam_diag - lam_cl) / max(1.0, lam_cl), ctx)
    if not simple and not math.isinf(lam_diag):
        for _ in range(3):
            cand = cl.extract_chain(gen, basis=cl.rotated_eigenbasis(gen, rng))
            suites["degenerate-minimization"].add(
                lam_diag - cl.classical_gap(cand), ctx)
    for _ in range(10):
        F = rng.normal(size=N)
        fdiag = chain.basis @ np.diag(F).astype(complex) @ chain.basis.conj().T
        e_q = dv.dirichlet_form(gen, fdiag)
        e_c = cl.classical_dirichlet(chain, F)
        v_q = dv.variance(gibbs, fdiag)
        v_c = cl.variance_pi(chain, F)
        suites["classical-correspondence"].add(abs(e_q - e_c) / max(1.0, e_c), ctx)
        suites["classical-correspondence"].add(abs(v_q - v_c) / max(1.0, v_c), ctx)

    g_inf = float(np.abs(gen.g_values).max())
    M_bound = g_inf * float(np.linalg.norm(sum(S @ S.conj().T for S in gen.jumps), 2))
    suites["exit-rate-bound"].add(chain.max_exit_rate() - M_bound, ctx)
    for mode in ("exhaustive", "sweep"):
        if mode == "exhaustive" and chain.size > cl.EXHAUSTIVE_STATE_CAP:
            continue
        w = cl.bottleneck(chain, mode=mode)
        suites["cheeger-chain"].add(
            w.phi**2 - 2.0 * w.big_lambda * lam_cl, {**ctx, "mode": mode})

    if all(gen.pair_rows[k].size == 1
           for k, om in enumerate(bohr.omegas) if abs(om) > bohr.tol):
        if simple and not math.isinf(lam_full):
            suites["dimension-1-orbit"].add(0.5 * lam_cl - lam_full, ctx)


def _commutator_decomposition_residual(gen, k, phi):
    """|  ||[S(w), phi]||_rho^2  -  weighted four-trace expansion |, per jump."""
    N = gen.dim
    rows, cols = gen.pair_rows[k], gen.pair_cols[k]
    om = gen.bohr.omegas[k]
    p = gen.weight_per_index
    w = np.sqrt(p[:, None] * p[None, :])
    phi_p = gen.to_eigenbasis(phi)
    rq = p**0.25
    phi_t = (rq[:, None] * phi_p) * rq[None, :]  # rho^(1/4) phi rho^(1/4)
    worst = 0.0
    for Sp in gen.jumps_eig:
        Som = np.zeros((N, N), dtype=complex)
        Som[rows, cols] = Sp[rows, cols]
        comm = Som @ phi_p - phi_p @ Som
        lhs = float(np.sum(w * np.abs(comm) ** 2))
        ePlus = math.exp(0.5 * gen.beta * om)
        rhs = (
            (1.0 / ePlus) * np.trace(Som @ phi_t @ phi_t.conj().T @ Som.conj().T)
            + ePlus * np.trace(Som.conj().T @ phi_t.conj().T @ phi_t @ Som)
            - np.trace(Som @ phi_t @ Som.conj().T @ phi_t.conj().T)
            - np.trace(Som @ phi_t.conj().T @ Som.conj().T @ phi_t)
        ).real
        scale = max(1.0, abs(lhs))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


# ---------------------------------------------------------------------------
# cheeger
# ---------------------------------------------------------------------------


def run_cheeger(cfg: ExperimentConfig) -> dict:
    """Cheeger-witness rows: projection, bound margin, and M components."""
    rows = []
    violations = 0
    for trial in range(cfg.trials):
        t0 = time.perf_counter()
        H, n, beta, rng = _instance_for_trial(cfg, trial)
        gen = _build_generator_for(cfg, H, beta)
        ap = sp.find_proper_ap(gen.levels.values)
        D = max(ap.length, 1)
        result = cl.cheeger_witness(gen, D, rotation_samples=cfg.rotation_samples, rng=rng)
        tol = 1e-9 * result["scale"] * cfg.tol_scale
        ok = result["margin"] >= -tol
        simple = bool(np.all(gen.levels.multiplicities == 1))
        if simple and not ok:
            violations += 1
        w = result["witness"]
        rows.append({
            "trial": trial, "seed": cfg.seed, "n": n, "beta": beta, "D": D,
            "witness": w.to_json(),
            "dirichlet": result["dirichlet"],
            "variance": result["variance"],
            "bound": result["bound"],
            "margin": result["margin"],
            "quantum_gap": gp._encode_gap(result["quantum_gap"]),
            "classical_gap": gp._encode_gap(result["classical_gap"]),
            "M": result["M"],
            "g_inf_bohr": result["g_inf_bohr"],
            "g_inf_closed_form": result["g_inf_closed_form"],
            "basis_nonunique": result["basis_nonunique"],
            "bound_satisfied": ok,
            "wall_ms": 1000.0 * (time.perf_counter() - t0),
        })
    return {"kind": "cheeger", "config": cfg.describe(), "rows": rows,
            "violations": violations, "timestamp": _now()}


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S")
