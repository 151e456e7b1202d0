"""Dataclass configs: testbed, grid, solver and experiment descriptions.

All configs are plain serializable dataclasses; `ExperimentConfig` round-trips
through JSON so a run manifest reproduces the run exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import SpecInvalid, UnsupportedSymmetry

TORUS = "torus_invariant"
GENERAL = "general"


@dataclass(frozen=True)
class TestbedSpec:
    """Projective testbed: P^n with an N-tuple of degrees summing to n+1.

    The degrees d_i split the anticanonical bundle of P^n, so the i-th
    polarization is O(d_i) and the reference Kahler forms are the matching
    multiples of the Fubini-Study form. Only lam = +1 is exercised.
    """

    n: int
    degrees: tuple[int, ...]
    k: int
    lam: int = 1
    symmetry: str = TORUS

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        if self.n not in (1, 2):
            raise SpecInvalid(f"ambient dimension must be 1 or 2, got {self.n}")
        if not self.degrees or any(d < 1 for d in self.degrees):
            raise SpecInvalid(f"degrees must be positive integers, got {self.degrees}")
        if sum(self.degrees) != self.n + 1:
            raise SpecInvalid(
                f"degrees must decompose the anticanonical class: "
                f"sum {sum(self.degrees)} != n+1 = {self.n + 1}"
            )
        if self.k < 1:
            raise SpecInvalid(f"quantization level k must be >= 1, got {self.k}")
        if self.lam != 1:
            raise SpecInvalid("only lam = +1 testbeds are provided")
        if self.symmetry not in (TORUS, GENERAL):
            raise SpecInvalid(f"unknown symmetry mode {self.symmetry!r}")
        if self.symmetry == GENERAL and self.n != 1:
            raise UnsupportedSymmetry("general (angular) grids are only provided on P^1")

    @property
    def nfactors(self) -> int:
        return len(self.degrees)

    def section_dim(self, i: int) -> int:
        """dim H^0 of the i-th polarization at level k: binom(d_i*k + n, n)."""
        m = self.degrees[i] * self.k
        if self.n == 1:
            return m + 1
        return (m + 2) * (m + 1) // 2

    def at_level(self, k: int) -> "TestbedSpec":
        return TestbedSpec(self.n, self.degrees, k, self.lam, self.symmetry)


@dataclass(frozen=True)
class GridConfig:
    resolution: int = 64
    angular: int = 0  # general mode only; 0 means auto (enough for exactness)
    tol_quad: float | None = None  # default picked per dimension

    def tol(self, n: int) -> float:
        if self.tol_quad is not None:
            return self.tol_quad
        return 1e-10 if n == 1 else 1e-7


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "t_iterate"  # t_iterate | flow
    tol_res: float | None = None  # default 1e-10 on P^1, 1e-6 on P^2
    max_iter: int = 500
    step_h: float | None = None  # default 1/(2k)
    scale_fix: bool = True
    torus_recenter: bool = True
    drift_factor: float = 1e3  # per-step recenter once drift exceeds this multiple

    def tol(self, n: int) -> float:
        if self.tol_res is not None:
            return self.tol_res
        return 1e-10 if n == 1 else 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    testbed: TestbedSpec
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    perturb: float = 2.0  # diagonal perturbation factor range [1/p, p]
    k_list: tuple[int, ...] = (4, 8, 16, 32)
    radial_nodes: int = 256
    flow_t_end: float = 10.0
    outputs: str = "out"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["testbed"]["degrees"] = list(self.testbed.degrees)
        d["k_list"] = list(self.k_list)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        try:
            tb = TestbedSpec(
                n=int(d["testbed"]["n"]),
                degrees=tuple(d["testbed"]["degrees"]),
                k=int(d["testbed"]["k"]),
                lam=int(d["testbed"].get("lam", 1)),
                symmetry=d["testbed"].get("symmetry", TORUS),
            )
            grid = GridConfig(**d.get("grid", {}))
            solver = SolverConfig(**d.get("solver", {}))
            return ExperimentConfig(
                testbed=tb,
                grid=grid,
                solver=solver,
                seed=int(d.get("seed", 0)),
                perturb=float(d.get("perturb", 2.0)),
                k_list=tuple(int(k) for k in d.get("k_list", (4, 8, 16, 32))),
                radial_nodes=int(d.get("radial_nodes", 256)),
                flow_t_end=float(d.get("flow_t_end", 10.0)),
                outputs=str(d.get("outputs", "out")),
            )
        except SpecInvalid:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecInvalid(f"malformed config: {exc}") from exc

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        try:
            return ExperimentConfig.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecInvalid(f"config is not valid JSON: {exc}") from exc
