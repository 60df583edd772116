import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfrs.basepatterns import BasePatternSet  # noqa: E402
from mfrs.forecaster import ModelConfig, TrainConfig  # noqa: E402
from mfrs.pipeline import run_pipeline  # noqa: E402
from mfrs.synthbench import compose_spec, generate_compose, optimal_metrics  # noqa: E402


@pytest.fixture(scope="session")
def small_compose_run():
    """A few epochs on noiseless Compose1 with short windows; shared by several modules."""
    spec = compose_spec("compose1", sigma=0.0, length=6000, seed=1)
    data = generate_compose(spec)
    result = run_pipeline(
        data.X,
        model_cfg=ModelConfig(lookback=48, horizon=24, hidden=16),
        train_cfg=TrainConfig(epochs=6, lr=3e-3, seed=1),
        patterns=BasePatternSet(manual_periods=(18, 24, 36, 72)),
        optimal=optimal_metrics(spec.noise),
    )
    return data, result


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
