"""
Gradient check mode
"""
import colorama

from config.settings import GRADCHECK_H, GRADCHECK_PROBES, GRADCHECK_THRESHOLD, VARIANT_FULL
from core.gradcheck import GradcheckReport, run_gradcheck_suite
from utils.helpers import print_banner


def run_gradcheck(variant: str = VARIANT_FULL, seed: int = 0, probes: int = GRADCHECK_PROBES,
                  h: float = GRADCHECK_H, threshold: float = GRADCHECK_THRESHOLD,
                  share_embeddings: bool = False, quiet: bool = False) -> GradcheckReport:
    """
    Run the finite-difference suite on the toy instance and print a per-tensor summary

    Returns:
        GradcheckReport (callers turn a failure into a non-zero exit)
    """
    report = run_gradcheck_suite(variant=variant, seed=seed, probe_count=probes, h=h, threshold=threshold,
                                 share_embeddings=share_embeddings)
    if not quiet:
        color = colorama.Fore.GREEN if report.passed else colorama.Fore.RED
        lines = [f"{name:<20} {err:.3e}  ({report.probes[name]} probes)" for name, err in report.errors.items()]
        lines.append(f"max relative error {report.max_error:.3e} (threshold {threshold:g}): "
                     f"{'PASS' if report.passed else 'FAIL'}")
        print_banner(f"GRADIENT CHECK ({variant})", lines, color=color)
    return report
