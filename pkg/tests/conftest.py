import pytest


@pytest.fixture
def announcer(capfd):
    """Print a line to the real stdout even under pytest capture (used by the
    acceptance suite for its one-line-per-criterion verdicts)."""

    def _announce(line: str) -> None:
        with capfd.disabled():
            print(line, flush=True)

    return _announce
