import json
import math
import threading
import time

import numpy as np
import pandas as pd
import pytest
import structlog

from bilqctrl.config import RunConfig
from bilqctrl.exceptions import ValidationError
from bilqctrl.logs import configure_logging
from bilqctrl.reporting import RunJournal, dumps, read_table, round_floats
from bilqctrl.workers import THREADS_ENV, run_ordered, thread_count


@pytest.fixture
def journal(tmp_path):
    return RunJournal(RunConfig(subcommand="transitions", output_dir=str(tmp_path / "out")))


def test_round_floats():
    assert round_floats(1.0 / 3.0) == 0.333333333333
    assert round_floats(float("nan")) is None
    assert round_floats(math.inf) is None
    assert round_floats(np.float64(2.5)) == 2.5
    assert round_floats(np.int64(3)) == 3 and isinstance(round_floats(np.int64(3)), int)
    assert round_floats(np.bool_(True)) is True
    assert round_floats(1 + 2j) == {"re": 1.0, "im": 2.0}
    assert round_floats({1: (0.1, np.array([0.5]))}) == {"1": [0.1, [0.5]]}


def test_dumps_is_sorted():
    text = dumps({"b": 1, "a": 0.1 + 0.2})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["a"] == 0.3
    assert text.endswith("\n")


def test_csv_has_version_header(journal):
    frame = pd.DataFrame({"n": [1, 2], "fidelity": [1.0 / 3.0, 0.5]})
    path = journal.write_csv(frame, "fidelity.csv", "fidelity")
    lines = path.read_text().splitlines()
    assert lines[0] == "# bilqctrl fidelity v1"
    assert lines[1] == "n,fidelity"
    assert lines[2] == "1,0.333333333333"
    pd.testing.assert_frame_equal(read_table(path), pd.DataFrame({"n": [1, 2],
                                                                  "fidelity": [0.333333333333, 0.5]}))


def test_manifest_lists_outputs(journal):
    journal.write_json({"x": 1}, "summary.json")
    journal.write_csv(pd.DataFrame({"a": [1]}), "a.csv", "a")
    journal.write_json({"x": 2}, "summary.json")
    path = journal.write_manifest()
    manifest = json.loads(path.read_text())
    assert manifest["outputs"] == ["a.csv", "summary.json"]
    assert manifest["seed"] == 42
    assert manifest["config"]["subcommand"] == "transitions"
    assert RunConfig.from_canonical(manifest["canonical"]) == journal.config
    assert {"numpy", "scipy", "pandas", "bilqctrl"} <= set(manifest["versions"])


def test_thread_count(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert thread_count() == 1
    monkeypatch.setenv(THREADS_ENV, "4")
    assert thread_count() == 4
    for bad in ("0", "many"):
        monkeypatch.setenv(THREADS_ENV, bad)
        with pytest.raises(ValidationError, match=THREADS_ENV):
            thread_count()


def test_run_ordered_keeps_job_order():
    seen = []
    lock = threading.Lock()

    def job(i):
        # later jobs finish first
        time.sleep(0.01 * (8 - i))
        with lock:
            seen.append(i)
        return i * i

    assert run_ordered(job, range(8), threads=4, show_progress=False) == [i * i for i in range(8)]
    assert sorted(seen) == list(range(8))
    assert run_ordered(job, [], threads=4, show_progress=False) == []


def test_configure_logging(capsys):
    configure_logging("DEBUG", json_output=True)
    structlog.get_logger("test").info("sample_event", value=1)
    line = capsys.readouterr().err.strip().splitlines()[-1]
    event = json.loads(line)
    assert event["event"] == "sample_event" and event["value"] == 1
    with pytest.raises(ValueError, match="Unknown log level"):
        configure_logging("LOUD")
    configure_logging("WARNING")
