import importlib.util
import warnings

import abscheck.config
from abscheck.config import Settings, settings


def test_defaults():
    assert settings.SEMANTIC_TOL >= settings.VALIDITY_TOL
    assert Settings.model_config["case_sensitive"] is True


def test_loading_emits_no_deprecation_warnings():
    spec = importlib.util.spec_from_file_location("abscheck_config_fresh", abscheck.config.__file__)
    module = importlib.util.module_from_spec(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("error", DeprecationWarning)
        spec.loader.exec_module(module)
    assert module.settings.WITNESS_LIMIT == settings.WITNESS_LIMIT
