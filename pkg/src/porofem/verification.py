"""MP1 verification studies against the Terzaghi series."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

from .constitutive import derived_coefficients
from .oracles import ErrorReport, convergence_order, l2_error, terzaghi_series, terzaghi_series_implicit
from .problems import HOUR, preset_mp1, run_preset

TERZAGHI_TOL = 0.05
TERZAGHI_FINE_TOL = 0.01
FINE_DT_FACTOR = 10
MIN_ORDER = 1.9


def _column(preset):
    c_v = derived_coefficients(preset.material).c_v
    p0 = float(preset.initial_p)
    return c_v, preset.length, p0


def terzaghi_report(preset, workers=1):
    """Run MP1 and compare every snapshot with the Terzaghi series."""
    c_v, H, p0 = _column(preset)
    problem, result = run_preset(preset, workers)
    report = ErrorReport(l2_rel=0.0, linf_rel=0.0, sample_times=list(result.times))
    for s in result.snapshots:
        l2, linf = l2_error(problem.depth(), s.x, lambda z, t=s.t: terzaghi_series(z, t, c_v, H, p0))
        report.per_time[s.t] = (l2, linf)
    if report.per_time:
        report.l2_rel = max(v[0] for v in report.per_time.values())
        report.linf_rel = max(v[1] for v in report.per_time.values())
    return report


@dataclass
class TerzaghiVerification:
    coarse: ErrorReport
    fine: ErrorReport
    dt: float
    fine_dt: float

    @property
    def coarse_ok(self):
        return self.coarse.worst() <= TERZAGHI_TOL

    @property
    def fine_ok(self):
        return self.fine.worst() <= TERZAGHI_FINE_TOL

    @property
    def passed(self):
        return self.coarse_ok and self.fine_ok

    def lines(self):
        out = []
        for rep, dt, tol in (
            (self.coarse, self.dt, TERZAGHI_TOL),
            (self.fine, self.fine_dt, TERZAGHI_FINE_TOL),
        ):
            out.append(f"dt = {dt / HOUR:g} hr (tolerance {tol:g}):")
            for t, (l2, linf) in sorted(rep.per_time.items()):
                flag = "ok" if l2 <= tol else "FAIL"
                out.append(f"  t = {t / HOUR:6g} hr  rel L2 = {l2:.4e}  rel Linf = {linf:.4e}  {flag}")
        out.append("PASS" if self.passed else "FAIL")
        return out


def verify_terzaghi(preset=None, workers=1):
    """Check the preset's step and a ten times smaller one against the series."""
    preset = preset or preset_mp1()
    fine = preset.with_(dt=preset.dt / FINE_DT_FACTOR)
    return TerzaghiVerification(
        coarse=terzaghi_report(preset, workers),
        fine=terzaghi_report(fine, workers),
        dt=preset.dt,
        fine_dt=fine.dt,
    )


@dataclass
class ConvergenceStudy:
    h: list
    errors: dict  # t -> errors per h against the time-discrete series
    continuous_errors: dict  # t -> errors per h against the exact series
    orders: dict
    continuous_orders: dict

    @property
    def min_order(self):
        return min(self.orders.values())

    @property
    def passed(self):
        return self.min_order >= MIN_ORDER


def spatial_convergence(preset=None, levels=3, h0=0.04, dt=0.01 * HOUR, workers=1):
    """Mesh study at fixed time step.

    The error is measured against the series of the backward-Euler time-discrete
    problem with the same step, which removes the temporal error; errors
    against the exact series are kept for reference.
    """
    preset = (preset or preset_mp1()).with_(dt=dt)
    c_v, H, p0 = _column(preset)
    hs = [h0 / 2**k for k in range(levels)]
    errs, cont = {}, {}
    for h in hs:
        problem, result = run_preset(preset.with_(hz=h), workers)
        for s in result.snapshots:
            e = l2_error(problem.depth(), s.x, lambda z, n=s.step_index: terzaghi_series_implicit(z, n, dt, c_v, H, p0))
            c = l2_error(problem.depth(), s.x, lambda z, t=s.t: terzaghi_series(z, t, c_v, H, p0))
            errs.setdefault(s.t, []).append(e[0])
            cont.setdefault(s.t, []).append(c[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        orders = {t: convergence_order(hs, e) for t, e in errs.items()}
        corders = {t: convergence_order(hs, e) for t, e in cont.items()}
    return ConvergenceStudy(hs, errs, cont, orders, corders)
