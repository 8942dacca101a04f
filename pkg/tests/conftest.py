import pytest

from fearkit.synth import gen_synthetic_session


@pytest.fixture(scope="session")
def synth_session_dir(tmp_path_factory):
    """One shared 10 s / 30 fps synthetic session (seed 7)."""
    root = tmp_path_factory.mktemp("sessions")
    out = root / "synth-7"
    gen_synthetic_session(out, seed=7, duration_s=10.0, fps=30.0)
    return out
