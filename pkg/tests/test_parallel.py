import math
import logging
import operator

import pytest

from nsf.parallel import Job, Pool, ProcessPool, SequentialPool

log = logging.getLogger("nsf.test")


def make(kind: str) -> Pool:
    return SequentialPool(log) if kind == "none" else ProcessPool(log, 2)


@pytest.mark.parametrize("kind", ["none", "proc"])
def test_results_in_submission_order(kind):
    pool = make(kind)
    seen: list[str] = []
    for i in range(4):
        pool.submit(str(i), operator.mul, i, 10, onsuccess=lambda job: seen.append(job.jobid))
    jobs = pool.wait_all()
    assert [job.result for job in jobs] == [0, 10, 20, 30]
    assert seen == ["0", "1", "2", "3"]
    assert pool.jobs == []


@pytest.mark.parametrize("kind", ["none", "proc"])
def test_errors_reach_callback(kind):
    pool = make(kind)
    failed: list[Job] = []
    pool.submit("ok", math.sqrt, 4.0, onerror=failed.append)
    pool.submit("bad", math.sqrt, -1.0, onerror=failed.append)
    ok, bad = pool.wait_all()
    assert ok.result == 2.0 and not ok.failed
    assert bad.failed and isinstance(bad.error, ValueError)
    assert failed == [bad]


def test_parallelmax_floor():
    assert SequentialPool(log).parallelmax == 1
    pool = ProcessPool(log, 0)
    assert pool.parallelmax == 1
    pool.wait_all()
