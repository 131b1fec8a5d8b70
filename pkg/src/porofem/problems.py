"""Runnable presets for the three model problems.

A :class:`ProblemPreset` fully determines a run. Material values for MP2 and
MP3 are representative defaults (a soft saturated soil and a clean sand);
every one of them can be overridden from a config file.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import assembly
from .assembly import BoundaryConditionSet, DirichletBC, NeumannBC, dirichlet_set
from .constitutive import INCOMPRESSIBLE, MaterialParams, VanGenuchten, derived_coefficients
from .errors import InvalidConfigError
from .mesh import build_scalar_dofmap, build_taylor_hood_dofmap, generate_interval_mesh, generate_quad_mesh
from .solvers import Factorization, SolverConfig, newton_solve, run_time_loop

PROBLEMS = ("mp1", "mp2", "mp3")
HOUR = 3600.0
MINUTE = 60.0


def lame_from_young(E, nu):
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


@dataclass(frozen=True)
class ProblemPreset:
    problem: str
    # domain (m)
    width: float = 0.0
    height: float = 0.0
    length: float = 0.0
    # discretization (m)
    hx: float = 0.0
    hy: float = 0.0
    hz: float = 0.0
    element: str = "line2"
    # time (s)
    dt: float = 1.0
    t_end: float = 0.0
    output_times: tuple = ()
    material: MaterialParams = field(default_factory=MaterialParams)
    # Newton settings
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_iter: int = 25
    bcs: BoundaryConditionSet = field(default_factory=BoundaryConditionSet)
    # initial pore pressure: a number (Pa) or "hydrostatic"
    initial_p: float | str = 0.0
    # hold the initial state in mechanical equilibrium (geostatic pre-stress)
    geostatic: bool = False

    def solver_config(self):
        return SolverConfig(
            dt=self.dt,
            t_end=self.t_end,
            output_times=tuple(self.output_times),
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_newton_iter=self.max_iter,
        )

    def with_(self, **kw):
        return replace(self, **kw)

    def build_mesh(self):
        if self.problem == "mp1":
            n = int(round(self.length / self.hz)) if self.hz > 0 else 0
            if self.hz <= 0 or abs(self.length / self.hz - n) > 1e-9:
                raise InvalidConfigError("domain.length must be divisible by discretization.hz")
            return generate_interval_mesh(self.length, n)
        return generate_quad_mesh(self.width, self.height, self.hx, self.hy, order=2)

    def errors(self):
        out = []
        if self.problem not in PROBLEMS:
            return [f"problem must be one of {PROBLEMS}, got {self.problem!r}"]
        want = "line2" if self.problem == "mp1" else "taylor_hood"
        if self.element != want:
            out.append(f"discretization.element must be {want!r} for {self.problem}")
        out.extend(self.material.errors())
        out.extend(self.solver_config().errors())
        if isinstance(self.initial_p, str):
            if self.initial_p != "hydrostatic":
                out.append("problem.initial_p must be a number or 'hydrostatic'")
        elif not math.isfinite(self.initial_p):
            out.append("problem.initial_p must be finite")
        if self.problem == "mp3" and (math.isfinite(self.material.k_s) or math.isfinite(self.material.k_w)):
            out.append("mp3 needs incompressible constituents (material.k_s = material.k_w = inf)")
        if self.problem == "mp1" and any(bc.field != "p" for bc in self.bcs.dirichlet):
            out.append("mp1 only has the pressure unknown")
        try:
            mesh = self.build_mesh()
        except InvalidConfigError as exc:
            out.extend(exc.errors)
        else:
            out.extend(self.bcs.errors(mesh, assembly.problem_fields(mesh)))
        return out

    def validate(self):
        errs = self.errors()
        if errs:
            raise InvalidConfigError(f"invalid {self.problem} configuration", errs)
        return self


def preset_mp1():
    """1 m single-drained column, c_v = 0.016 m^2/hr, p0 = 100 kPa, 80 hr."""
    # any (lambda, mu, k) with (lambda + 2 mu / 3) k / mu_w = 0.016 m^2/hr works
    c_v = 0.016 / HOUR
    K = 2.0e6
    mat = MaterialParams(
        lam=1.0e6, mu=1.5e6, k_s=INCOMPRESSIBLE, k_w=INCOMPRESSIBLE,
        k=c_v * 1.0e-3 / K, mu_w=1.0e-3, rho_s=2650.0, rho_w=1000.0, phi0=0.4, gravity=0.0,
    )
    return ProblemPreset(
        problem="mp1",
        length=1.0,
        hz=0.02,
        element="line2",
        dt=HOUR,
        t_end=80 * HOUR,
        output_times=tuple(h * HOUR for h in (5, 10, 20, 40, 80)),
        material=mat,
        bcs=BoundaryConditionSet(
            dirichlet=(DirichletBC("top", "p", 0.0),),
            neumann=(NeumannBC("bottom", "flux", 0.0),),
        ),
        initial_p=100.0e3,
    )


def preset_mp2():
    """1 m x 1 m saturated body under a 0.1 m strip footing, 80 s."""
    lam, mu = lame_from_young(10.0e6, 0.25)
    mat = MaterialParams(
        lam=lam, mu=mu, k_s=1.0e10, k_w=2.2e9, k=1.0e-12, mu_w=1.0e-3,
        rho_s=2650.0, rho_w=1000.0, phi0=0.4, gravity=0.0,
    )
    return ProblemPreset(
        problem="mp2",
        width=1.0,
        height=1.0,
        hx=0.02,
        hy=0.02,
        element="taylor_hood",
        dt=1.0,
        t_end=80.0,
        output_times=(20.0, 40.0, 80.0),
        material=mat,
        bcs=BoundaryConditionSet(
            dirichlet=(
                DirichletBC("left", "ux", 0.0),
                DirichletBC("right", "ux", 0.0),
                DirichletBC("bottom", "ux", 0.0),
                DirichletBC("bottom", "uy", 0.0),
                DirichletBC("top", "p", 0.0),
            ),
            neumann=(NeumannBC("top", "ty", -1.0e6, span=(0.45, 0.55)),),
        ),
        initial_p=0.0,
    )


def preset_mp3():
    """0.25 m x 1 m sand column draining under gravity through its base, 600 min."""
    lam, mu = lame_from_young(1.3e6, 0.4)
    mat = MaterialParams(
        lam=lam, mu=mu, k_s=INCOMPRESSIBLE, k_w=INCOMPRESSIBLE, k=4.5e-13, mu_w=1.0e-3,
        rho_s=2000.0, rho_w=1000.0, phi0=0.2975, gravity=9.81,
        vg=VanGenuchten(alpha=3.0e3, n=2.0, m=None, s_res=0.2, s_max=1.0),
    )
    return ProblemPreset(
        problem="mp3",
        width=0.25,
        height=1.0,
        # 0.25 m is not a multiple of 0.02 m; 12 columns keep the spacing closest
        hx=0.25 / 12,
        hy=0.02,
        element="taylor_hood",
        dt=MINUTE,
        t_end=600 * MINUTE,
        output_times=tuple(m * MINUTE for m in (5, 10, 20, 30, 600)),
        material=mat,
        bcs=BoundaryConditionSet(
            dirichlet=(
                DirichletBC("left", "ux", 0.0),
                DirichletBC("right", "ux", 0.0),
                DirichletBC("bottom", "ux", 0.0),
                DirichletBC("bottom", "uy", 0.0),
                DirichletBC("bottom", "p", 0.0),
            ),
        ),
        initial_p="hydrostatic",
        geostatic=True,
    )


PRESETS = {"mp1": preset_mp1, "mp2": preset_mp2, "mp3": preset_mp3}


def get_preset(name):
    try:
        return PRESETS[name]()
    except KeyError:
        raise InvalidConfigError(f"unknown problem {name!r}; choose from {PROBLEMS}") from None


# ---------------------------------------------------------------------------
# runtime problem objects


class _Base:
    def __init__(self, preset, workers=1):
        preset.validate()
        self.preset = preset
        self.params = preset.material
        self.workers = workers
        self.mesh = preset.build_mesh()

    def _dirichlet(self, t):
        return dirichlet_set(self.mesh, self.dofmap, self.preset.bcs, t)

    def _initial_pressure(self, coords):
        if self.preset.initial_p == "hydrostatic":
            # zero at the top surface, rho_w g depth below it
            y = coords[:, -1]
            top = self.mesh.extent[-1]
            return self.params.rho_w * self.params.gravity * (top - y)
        return np.full(len(coords), float(self.preset.initial_p))


class LinearProblem(_Base):
    """Shared step logic for problems with a time-invariant operator."""

    def _setup_linear(self, op):
        self.op = op
        n = self.dofmap.n_dofs
        self._bc_idx, _ = self._dirichlet(0.0)
        keep = np.ones(n)
        keep[self._bc_idx] = 0.0
        D = sp.diags(keep)
        self.A_bc = (D @ op.A @ D + sp.diags(1.0 - keep)).tocsr()
        self.A_dcols = (op.A @ sp.diags(1.0 - keep)).tocsr()
        self.lu = Factorization(self.A_bc)

    def step(self, x_prev, t, n):
        idx, vals = self._dirichlet(t)
        if not np.array_equal(idx, self._bc_idx):
            raise InvalidConfigError("Dirichlet dof set must not change in time")
        sysm = self.op.system(x_prev, t)
        xd = np.zeros_like(x_prev)
        xd[idx] = vals
        b = sysm.b - self.A_dcols @ xd
        b[idx] = vals
        x = self.lu.solve(b)
        x[idx] = vals
        return x, {}


class Mp1Problem(LinearProblem):
    def __init__(self, preset, workers=1):
        super().__init__(preset, workers)
        self.dofmap = build_scalar_dofmap(self.mesh, "p")
        self._setup_linear(assembly.Mp1Operator(self.mesh, self.dofmap, self.params, preset.dt, preset.bcs))

    def initial_state(self):
        return self._initial_pressure(self.mesh.nodes)

    def depth(self):
        return self.mesh.nodes[:, 0]

    def pressure(self, x):
        return x


class _TaylorHood:
    def displacement(self, x):
        d = self.dofmap
        return np.column_stack([x[d.block("ux")], x[d.block("uy")]])

    def pressure(self, x):
        return x[self.dofmap.block("p")]

    def pressure_nodes(self):
        return self.dofmap.field_nodes["p"]


class Mp2Problem(_TaylorHood, LinearProblem):
    def __init__(self, preset, workers=1):
        super().__init__(preset, workers)
        self.dofmap = build_taylor_hood_dofmap(self.mesh)
        self.coefficients = derived_coefficients(self.params)
        self._setup_linear(
            assembly.Mp2Operator(self.mesh, self.dofmap, self.params, preset.dt, preset.bcs, workers)
        )

    def initial_state(self):
        x = np.zeros(self.dofmap.n_dofs)
        x[self.dofmap.block("p")] = self._initial_pressure(self.mesh.nodes[self.pressure_nodes()])
        return x

    def center_node(self):
        """Top-surface node closest to x = width / 2."""
        top = self.mesh.boundary_nodes["top"]
        xc = 0.5 * self.mesh.extent[0]
        return int(top[np.argmin(np.abs(self.mesh.nodes[top, 0] - xc))])

    def step(self, x_prev, t, n):
        x, info = super().step(x_prev, t, n)
        info["center_uy"] = float(x[self.dofmap.index("uy", [self.center_node()])[0]])
        info["p_norm"] = float(np.linalg.norm(self.pressure(x)))
        return x, info


class Mp3Problem(_TaylorHood, _Base):
    def __init__(self, preset, workers=1, use_numba=None):
        super().__init__(preset, workers)
        self.dofmap = build_taylor_hood_dofmap(self.mesh)
        self.op = assembly.Mp3Operator(
            self.mesh, self.dofmap, self.params, preset.dt, preset.bcs, workers, use_numba=use_numba
        )
        self.config = preset.solver_config()
        self.width = self.mesh.extent[0]
        x0 = self.initial_state()
        if preset.geostatic:
            self.op.offset = self.op.residual(x0, x0, 0.0)
            self.op.offset[self.dofmap.block("p")] = 0.0

    def initial_state(self):
        x = np.zeros(self.dofmap.n_dofs)
        x[self.dofmap.block("p")] = self._initial_pressure(self.mesh.nodes[self.pressure_nodes()])
        return x

    def step(self, x_prev, t, n):
        idx, vals = self._dirichlet(t)
        free = np.ones(self.dofmap.n_dofs, dtype=bool)
        free[idx] = False
        base = x_prev.copy()
        base[idx] = vals
        cache = {}

        def full(xf):
            x = base.copy()
            x[free] = xf
            return x

        def residual(xf):
            r, J = self.op.residual_and_jacobian(full(xf), x_prev, t)
            cache["J"] = J
            cache["r"] = r
            return r[free]

        def jacobian(xf):
            return cache["J"][free][:, free]

        xf, iters = newton_solve(residual, jacobian, base[free], self.config)
        x = full(xf)
        S, kr = self.op.point_fields(x)
        reaction = cache["r"][self.dofmap.index("p", self.mesh.boundary_nodes["bottom"][::2])]
        w_y = assembly.boundary_mean_velocity(self.mesh, self.dofmap, self.params, x, "bottom", 1)
        info = {
            "newton_iterations": iters,
            "s_min": float(S.min()),
            "s_max": float(S.max()),
            "kr_min": float(kr.min()),
            "kr_max": float(kr.max()),
            "bottom_w_y": w_y,
            # water leaving through the base per unit thickness, from the discrete balance
            "outflow_consistent": -float(reaction.sum()),
        }
        return x, info

    def water_balance(self, x):
        """Water-content loss relative to the saturated initial state (m^3 per m).

        Returns ``(desaturation, compaction)``: the pore volume emptied,
        ``int phi (1 - S)``, and the water squeezed out by skeleton volume
        change, ``-int S div u``. Their sum is the water that has left the body.
        """
        g = self.op.geom
        ue, pe = self.op._gather(x)
        div = np.einsum("eca,eqac->eq", ue, g.dN9)
        phi = 1.0 - self.params.solid_fraction0 * (1.0 - div)
        S, _ = self.op.point_fields(x)
        desat = float(np.sum(g.wdet * phi * (1.0 - S)))
        compaction = -float(np.sum(g.wdet * S * div))
        return desat, compaction


def build_problem(preset, workers=1):
    cls = {"mp1": Mp1Problem, "mp2": Mp2Problem, "mp3": Mp3Problem}[preset.problem]
    return cls(preset, workers)


def run_preset(preset, workers=1, on_step=None):
    problem = build_problem(preset, workers)
    return problem, run_time_loop(problem, preset.solver_config(), on_step=on_step)
