"""Acceptance thresholds for the experiment tables and functions that test
DiagnosticsRecords against them."""
from dataclasses import dataclass
from math import isfinite

SBP_VARIANTS = ("QuadratureI", "Collocation")

# energy differences over one period with lambda = 1 (strong and weak agree)
REFERENCE_ENERGY = {
    (2, "QuadratureI", "c_DG"): -5.847e-03,
    (2, "QuadratureI", "c_plus"): -4.131e-02,
    (2, "Collocation", "c_DG"): -5.775e-03,
    (2, "Collocation", "c_plus"): -4.008e-02,
    (3, "QuadratureI", "c_DG"): -1.942e-04,
    (3, "QuadratureI", "c_plus"): -1.860e-03,
    (4, "QuadratureI", "c_DG"): -4.326e-06,
    (4, "QuadratureI", "c_plus"): -4.887e-05,
}


@dataclass(frozen=True)
class Thresholds:
    adv_equivalence: float = 1e-10
    adv_nonequivalence: float = 1e-4
    adv_conservation: float = 1e-12
    adv_energy_zero: float = 1e-12
    adv_energy_agree: float = 1e-10
    adv_energy_rel: float = 0.05
    euler_equivalence: float = 1e-9
    euler_nonequivalence: float = 1e-5
    euler_conservation: float = 1e-9


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} [{self.criterion}] {self.name}: {self.detail}"


def _tag(r):
    return f"{r.problem} p={r.p} {r.variant} {r.c} {r.label}"


def _le(x, tol):
    return x is not None and isfinite(x) and abs(x) <= tol


def expected_unstable(rec):
    return rec.problem == "advection" and rec.variant == "QuadratureII" and float(rec.label) == 0.0


def unexpected_instabilities(records):
    return [_tag(r) for r in records if not r.stable and not expected_unstable(r)]


def check_advection(records, th: Thresholds = Thresholds()):
    """Criteria 2-5 on the advection rows; returns a list of CheckResults."""
    out = []
    for r in records:
        if r.problem != "advection":
            continue
        tag = _tag(r)
        lam = float(r.label)
        if r.variant == "QuadratureII" and lam == 0.0:
            ok = not r.stable_strong and not r.stable_weak
            out.append(CheckResult(5, f"blow-up guard trips: {tag}", ok,
                                   f"failed steps {r.failed_step_strong}/{r.failed_step_weak}"))
            continue
        if not r.stable:
            out.append(CheckResult(5, f"stable run: {tag}", False, "blow-up guard tripped"))
            continue
        if r.variant == "QuadratureII":
            out.append(CheckResult(5, f"stable run: {tag}", True, "completed"))
        if r.variant in SBP_VARIANTS:
            out.append(CheckResult(2, f"equivalence <= {th.adv_equivalence:g}: {tag}",
                                   _le(r.equivalence, th.adv_equivalence), f"{r.equivalence:.3e}"))
        else:
            out.append(CheckResult(2, f"non-equivalence >= {th.adv_nonequivalence:g}: {tag}",
                                   r.equivalence >= th.adv_nonequivalence, f"{r.equivalence:.3e}"))
        ok = _le(r.conservation_strong, th.adv_conservation) and _le(r.conservation_weak,
                                                                     th.adv_conservation)
        out.append(CheckResult(3, f"conservation <= {th.adv_conservation:g}: {tag}", ok,
                               f"{r.conservation_strong:.3e} / {r.conservation_weak:.3e}"))
        if r.variant not in SBP_VARIANTS:
            continue
        es, ew = r.energy_strong, r.energy_weak
        if lam == 0.0:
            out.append(CheckResult(4, f"energy invariant: {tag}",
                                   _le(es, th.adv_energy_zero) and _le(ew, th.adv_energy_zero),
                                   f"{es:.3e} / {ew:.3e}"))
        else:
            ok = es < 0 and ew < 0 and abs(es - ew) <= th.adv_energy_agree
            out.append(CheckResult(4, f"energy decays, strong = weak: {tag}", ok,
                                   f"{es:.4e} / {ew:.4e}"))
            ref = REFERENCE_ENERGY.get((r.p, r.variant, r.c))
            if ref is not None and lam == 1.0:
                rel = abs(es - ref) / abs(ref)
                out.append(CheckResult(4, f"energy within {th.adv_energy_rel:.0%} of {ref:.3e}: {tag}",
                                       rel <= th.adv_energy_rel, f"{es:.4e} (rel {rel:.2%})"))
    return out


def check_euler(records, th: Thresholds = Thresholds()):
    """Criterion 6 on the Euler rows (one record per equation)."""
    out = []
    for r in records:
        if r.problem != "euler":
            continue
        tag = _tag(r)
        if not r.stable:
            out.append(CheckResult(6, f"stable run: {tag}", False, "blow-up guard tripped"))
            continue
        if r.variant in SBP_VARIANTS:
            out.append(CheckResult(6, f"equivalence <= {th.euler_equivalence:g}: {tag}",
                                   _le(r.equivalence, th.euler_equivalence), f"{r.equivalence:.3e}"))
        else:
            out.append(CheckResult(6, f"non-equivalence >= {th.euler_nonequivalence:g}: {tag}",
                                   r.equivalence >= th.euler_nonequivalence, f"{r.equivalence:.3e}"))
        ok = _le(r.conservation_strong, th.euler_conservation) and _le(r.conservation_weak,
                                                                       th.euler_conservation)
        out.append(CheckResult(6, f"conservation <= {th.euler_conservation:g}: {tag}", ok,
                               f"{r.conservation_strong:.3e} / {r.conservation_weak:.3e}"))
    return out
