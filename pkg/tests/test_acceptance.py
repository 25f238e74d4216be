"""Acceptance suite at full sample sizes.

Each test runs one check with its default (full) parameters, records one
summary line per criterion and asserts the check verdict.  The whole file
takes about 13 minutes on one core; deselect with ``-m "not slow"``.
"""
import pytest

from sinhq import verify

CRITERIA = [
    (1, "algebra", "exact algebra"),
    (2, "green", "Green function log coefficient and offset"),
    (3, "gmc-identities", "GMC mean and second moment identities, Wick series"),
    (4, "gmc-scaling", "GMC shell-slope multifractality"),
    (5, "besov", "Besov constant drift along the ladder"),
    (6, "solver", "solver correctness"),
    (7, "apriori", "a priori ratios under refinement"),
    (8, "reduction-free", "free dimensional reduction"),
    (9, "reduction-interacting", "interacting dimensional reduction"),
    (10, "os", "reflection positivity, clustering, symmetry"),
    (11, "clustering-tilted", "tilted-equation clustering"),
]


def _line(n, cid, rep):
    parts = []
    for name, c in rep.criteria.items():
        mark = "ok" if c["pass"] else "FAIL"
        parts.append(f"{name}={mark}" + (f" ({c['detail']})" if c["detail"] else ""))
    verdict = "PASS" if rep.passed else "FAIL"
    return f"CRITERION {n}: {verdict} [{cid}, {rep.runtime_s:.1f} s] " + "; ".join(parts)


@pytest.mark.slow
@pytest.mark.parametrize("n,cid,title", CRITERIA, ids=[f"{n:02d}-{c}" for n, c, _ in CRITERIA])
def test_criterion(n, cid, title, acceptance_log):
    rep = verify.run_check(cid, seed=0)
    line = _line(n, cid, rep)
    acceptance_log.append(line)
    print(line)
    failed = [k for k, c in rep.criteria.items() if not c["pass"]]
    assert rep.passed, f"{title}: failed {failed}"
