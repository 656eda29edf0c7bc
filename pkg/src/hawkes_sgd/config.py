"""Run configuration: INI-style config files, defaults, hashing, and the
fitted-parameters file format.

One config file drives every subcommand; sections [model], [solver],
[strata], [simulate], [ingest] and [sweep] all have defaults matching the
library's, and the effective (post-default) configuration is echoed into
every output artifact together with its hash.
"""

import configparser
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .kernels import make_kernel
from .model import HawkesModel
from .solver import SolverConfig, StrataConfig

_FIELD_NAMES = ("omega", "alpha", "beta", "delta")


@dataclass
class ModelConfig:
    d: int = 1
    family: list = None  # d x d family names
    r: int = 1
    frozen: dict = field(default_factory=dict)  # field -> list of r floats

    def build(self):
        frozen = {k: np.asarray(v, dtype=float) for k, v in self.frozen.items()}
        return HawkesModel(
            [
                [make_kernel(self.family[k][i], r=self.r, frozen=frozen or None) for i in range(self.d)]
                for k in range(self.d)
            ]
        )


@dataclass
class SimulateSection:
    horizon: float = 1000.0
    n_paths: int = 1
    mu: np.ndarray = None
    kernel_fields: dict = None  # (k, i) -> {field: array of r}
    family: str = None  # ground-truth family override (misspecification studies)
    r: int = 0
    frozen: dict = field(default_factory=dict)

    def ground_truth(self, model_cfg):
        """Build the simulation ground truth; it may differ from the fit model."""
        if self.mu is None or self.kernel_fields is None:
            raise ValidationError("[simulate] section with mu and kernel parameters is required")
        from .simulate import GroundTruth

        d = model_cfg.d
        family = [[self.family] * d for _ in range(d)] if self.family else model_cfg.family
        r = self.r or model_cfg.r
        frozen = self.frozen or model_cfg.frozen
        gt_cfg = ModelConfig(d=d, family=family, r=r, frozen=dict(frozen))
        model = gt_cfg.build()
        params = []
        for k in range(d):
            row = []
            for i in range(d):
                fields = self.kernel_fields.get((k, i))
                if fields is None:
                    raise ValidationError(f"[simulate] missing kernel parameters for pair ({k + 1},{i + 1})")
                ker = model.kernels[k][i]
                missing = [f for f in ker.free_fields if f not in fields]
                if missing:
                    raise ValidationError(
                        f"[simulate] pair ({k + 1},{i + 1}) is missing fields {missing}"
                    )
                row.append(ker.pack(**{f: fields[f] for f in ker.free_fields}))
            params.append(row)
        theta = model.pack(self.mu, params)
        return GroundTruth(model, theta)


@dataclass
class IngestSection:
    events: str = None
    time_scale: float = 1.0
    horizon: float = None


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    strata: StrataConfig = field(default_factory=StrataConfig)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    ingest: IngestSection = field(default_factory=IngestSection)
    sweep_horizons: list = field(default_factory=list)

    def effective_text(self):
        """Canonical echo of every effective value (defaults resolved)."""
        out = io.StringIO()
        out.write("[model]\n")
        out.write(f"d = {self.model.d}\nr = {self.model.r}\n")
        for k in range(self.model.d):
            for i in range(self.model.d):
                out.write(f"family_{k + 1}_{i + 1} = {self.model.family[k][i]}\n")
        for name in sorted(self.model.frozen):
            out.write(f"frozen_{name} = {_fmt_list(self.model.frozen[name])}\n")
        out.write("[solver]\n")
        for name in ("n_iter", "learning_rate", "rate_halving_period", "beta1", "beta2", "eps",
                     "seed", "n_starts", "pilot_iters", "early_stop", "early_stop_tol",
                     "early_stop_patience"):
            out.write(f"{name} = {getattr(self.solver, name)}\n")
        out.write("[strata]\n")
        for name in ("single_budget", "double_budget", "h_max", "n_lag_bins", "rounds",
                     "n_rest_bins", "rest_draws", "ema_weight", "tail_target", "final_gap"):
            out.write(f"{name} = {getattr(self.strata, name)}\n")
        out.write("[simulate]\n")
        out.write(f"horizon = {self.simulate.horizon}\nn_paths = {self.simulate.n_paths}\n")
        if self.simulate.family:
            out.write(f"family = {self.simulate.family}\n")
        if self.simulate.r:
            out.write(f"r = {self.simulate.r}\n")
        for name in sorted(self.simulate.frozen):
            out.write(f"frozen_{name} = {_fmt_list(self.simulate.frozen[name])}\n")
        if self.simulate.mu is not None:
            out.write(f"mu = {_fmt_list(self.simulate.mu)}\n")
            for (k, i), fields in sorted(self.simulate.kernel_fields.items()):
                for name in sorted(fields):
                    out.write(f"{name}_{k + 1}_{i + 1} = {_fmt_list(fields[name])}\n")
        if self.ingest.events:
            out.write("[ingest]\n")
            out.write(f"events = {self.ingest.events}\ntime_scale = {self.ingest.time_scale}\n")
            if self.ingest.horizon is not None:
                out.write(f"horizon = {self.ingest.horizon}\n")
        if self.sweep_horizons:
            out.write("[sweep]\n")
            out.write(f"horizons = {_fmt_list(self.sweep_horizons)}\n")
        return out.getvalue()

    def digest(self):
        return hashlib.sha256(self.effective_text().encode()).hexdigest()[:16]


def _fmt_list(values):
    return " ".join(f"{float(v):.12g}" for v in np.atleast_1d(values))


def _parse_floats(text):
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def load_config(path):
    """Parse an INI config file into a RunConfig with defaults filled in."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as handle:
        parser.read_file(handle)
    return parse_config(parser)


def parse_config(parser):
    cfg = RunConfig()
    if parser.has_section("model"):
        sec = parser["model"]
        cfg.model.d = sec.getint("d", 1)
        cfg.model.r = sec.getint("r", 1)
        default_family = sec.get("family", "exponential").strip()
        fam = [[default_family] * cfg.model.d for _ in range(cfg.model.d)]
        for key, value in sec.items():
            if key.startswith("family_"):
                k, i = _pair_from_key(key, cfg.model.d)
                fam[k][i] = value.strip()
            if key.startswith("frozen_"):
                name = key[len("frozen_") :]
                if name not in _FIELD_NAMES:
                    raise ValidationError(f"unknown frozen field {name!r} in [model]")
                cfg.model.frozen[name] = _parse_floats(value)
        cfg.model.family = fam
    else:
        cfg.model.family = [["exponential"]]
    if parser.has_section("solver"):
        sec = parser["solver"]
        s = cfg.solver
        s.n_iter = sec.getint("n_iter", s.n_iter)
        s.learning_rate = sec.getfloat("learning_rate", s.learning_rate)
        s.rate_halving_period = sec.getint("rate_halving_period", s.rate_halving_period)
        s.beta1 = sec.getfloat("beta1", s.beta1)
        s.beta2 = sec.getfloat("beta2", s.beta2)
        s.eps = sec.getfloat("eps", s.eps)
        s.seed = sec.getint("seed", s.seed)
        s.n_starts = sec.getint("n_starts", s.n_starts)
        s.pilot_iters = sec.getint("pilot_iters", s.pilot_iters)
        s.early_stop = sec.getboolean("early_stop", s.early_stop)
        s.early_stop_tol = sec.getfloat("early_stop_tol", s.early_stop_tol)
        s.early_stop_patience = sec.getint("early_stop_patience", s.early_stop_patience)
    if parser.has_section("strata"):
        sec = parser["strata"]
        st = cfg.strata
        st.single_budget = sec.getint("single_budget", st.single_budget)
        st.double_budget = sec.getint("double_budget", st.double_budget)
        st.h_max = sec.getint("h_max", st.h_max)
        st.n_lag_bins = sec.getint("lag_strata", sec.getint("n_lag_bins", st.n_lag_bins))
        st.rounds = sec.getint("rounds", st.rounds)
        st.n_rest_bins = sec.getint("n_rest_bins", st.n_rest_bins)
        st.rest_draws = sec.getint("rest_draws", st.rest_draws)
        st.ema_weight = sec.getfloat("ema_weight", st.ema_weight)
        st.tail_target = sec.getint("tail_target", st.tail_target)
        st.final_gap = sec.getint("final_gap", st.final_gap)
    if parser.has_section("simulate"):
        sec = parser["simulate"]
        sim = cfg.simulate
        sim.horizon = sec.getfloat("horizon", sec.getfloat("t", sim.horizon))
        sim.n_paths = sec.getint("n_paths", sim.n_paths)
        sim.family = sec.get("family", None)
        sim.r = sec.getint("r", 0)
        for key, value in sec.items():
            if key.startswith("frozen_"):
                name = key[len("frozen_") :]
                if name not in _FIELD_NAMES:
                    raise ValidationError(f"unknown frozen field {name!r} in [simulate]")
                sim.frozen[name] = _parse_floats(value)
        if "mu" in sec:
            sim.mu = _parse_floats(sec["mu"])
            if len(sim.mu) != cfg.model.d:
                raise ValidationError(f"[simulate] mu needs {cfg.model.d} entries, got {len(sim.mu)}")
            sim.kernel_fields = {}
            for key, value in sec.items():
                head = key.split("_")[0]
                if head in _FIELD_NAMES and key.count("_") == 2:
                    k, i = _pair_from_key(key, cfg.model.d)
                    sim.kernel_fields.setdefault((k, i), {})[head] = _parse_floats(value)
    if parser.has_section("ingest"):
        sec = parser["ingest"]
        cfg.ingest.events = sec.get("events", None)
        cfg.ingest.time_scale = sec.getfloat("time_scale", 1.0)
        horizon = sec.get("horizon", "").strip()
        cfg.ingest.horizon = float(horizon) if horizon else None
    if parser.has_section("sweep"):
        cfg.sweep_horizons = sorted(_parse_floats(parser["sweep"].get("horizons", "")).tolist())
    return cfg


def _pair_from_key(key, d):
    parts = key.split("_")
    try:
        k, i = int(parts[-2]) - 1, int(parts[-1]) - 1
    except (ValueError, IndexError):
        raise ValidationError(f"cannot parse pair indices from config key {key!r}") from None
    if not (0 <= k < d and 0 <= i < d):
        raise ValidationError(f"pair indices out of range in config key {key!r} (d={d})")
    return k, i


# -- fitted-parameters files ---------------------------------------------------


def write_params_file(path, model, theta, meta):
    """Deterministically ordered, configparser-readable fitted-parameter dump."""
    lines = ["[run]"]
    for key in sorted(meta):
        lines.append(f"{key} = {meta[key]}")
    lines.append(f"d = {model.d}")
    for k in range(model.d):
        th_k = model.theta_k(theta, k)
        lines.append(f"[dim_{k + 1}]")
        lines.append(f"mu = {model.mu_of(th_k):.12g}")
        for i in range(model.d):
            ker = model.kernels[k][i]
            par = model.kernel_params(th_k, k, i)
            fields = ker.fields(par)
            lines.append(f"[kernel_{k + 1}_{i + 1}]")
            lines.append(f"family = {ker.family}")
            lines.append(f"r = {ker.r}")
            for name in ker.FIELDS:
                tag = "frozen_" + name if name in ker.frozen else name
                lines.append(f"{tag} = {_fmt_list(fields[name])}")
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def read_params_file(path):
    """Rebuild (model, theta, meta) from a fitted-parameters file."""
    parser = configparser.ConfigParser()
    with open(path) as handle:
        parser.read_file(handle)
    if not parser.has_section("run"):
        raise ValidationError(f"{path} is not a fitted-parameters file (missing [run])")
    meta = dict(parser["run"])
    d = int(meta.pop("d"))
    kernels = []
    params = []
    mu = np.zeros(d)
    for k in range(d):
        mu[k] = float(parser[f"dim_{k + 1}"]["mu"])
        row_k = []
        par_k = []
        for i in range(d):
            sec = parser[f"kernel_{k + 1}_{i + 1}"]
            r = int(sec["r"])
            frozen = {}
            values = {}
            for key, text in sec.items():
                if key in ("family", "r"):
                    continue
                if key.startswith("frozen_"):
                    frozen[key[len("frozen_") :]] = _parse_floats(text)
                else:
                    values[key] = _parse_floats(text)
            ker = make_kernel(sec["family"], r=r, frozen=frozen or None)
            row_k.append(ker)
            par_k.append(ker.pack(**values))
        kernels.append(row_k)
        params.append(par_k)
    model = HawkesModel(kernels)
    theta = model.pack(mu, params)
    return model, theta, meta
