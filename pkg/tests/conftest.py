import json

import pytest

from abscheck.fixtures import chain_effect_models, chain_models, load_packaged_model, voting_models
from abscheck.main import cli_main


@pytest.fixture(scope="session")
def ab():
    """A->B with p(A=1)=0.3, p(B=1|A=0)=0.2, p(B=1|A=1)=0.9."""
    return load_packaged_model("ab.json")


@pytest.fixture(scope="session")
def example1():
    return load_packaged_model("example1.json")


@pytest.fixture(scope="session")
def chain():
    return chain_models()


@pytest.fixture(scope="session")
def chain_effect():
    return chain_effect_models()


@pytest.fixture(scope="session")
def voting():
    return voting_models()


@pytest.fixture
def run(capsys):
    """Run the CLI in-process; returns (status, stdout, stderr)."""

    def _run(*argv):
        status = cli_main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return status, out, err

    return _run


@pytest.fixture
def run_json(run):
    def _run(*argv):
        status, out, err = run(*argv, "--output", "json")
        return status, (json.loads(out) if out.strip() else None), err

    return _run


@pytest.fixture
def fixture_dir(tmp_path, run):
    """Write one bundled fixture into a temp dir and return the dir."""

    def _write(name):
        status, _, err = run("fixture", name, "--out", tmp_path)
        assert status == 0, err
        return tmp_path

    return _write
