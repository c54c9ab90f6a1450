import pytest

from p2pbotnet.pipeline import compute_metrics, run_pipeline
from p2pbotnet.synth import generate_dataset


@pytest.fixture(scope="session")
def default_dataset():
    return generate_dataset()


@pytest.fixture(scope="session")
def default_report(default_dataset):
    report = run_pipeline(default_dataset.flows)
    report.metrics = compute_metrics(report, default_dataset.truth)
    return report


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
