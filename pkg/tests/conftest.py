from fractions import Fraction

import numpy as np
import pytest

from config import Config
from services.database import init_db
from services.qnum import QContext


@pytest.fixture(scope="session")
def test_storage(tmp_path_factory):
    base = tmp_path_factory.mktemp("storage")
    reports_dir = base / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)

    db_path = base / "test.db"
    database_url = f"sqlite:///{db_path}"
    init_db(database_url)

    return {
        "STORAGE_DIR": base,
        "OUTPUT_DIR": reports_dir,
        "DATABASE_URL": database_url,
    }


@pytest.fixture
def ctx():
    return QContext(Fraction(1, 2), trunc_dim=64)


@pytest.fixture
def small_ctx():
    return QContext(Fraction(1, 2), trunc_dim=16)


@pytest.fixture(params=["3/10", "1/2", "9/10"])
def sweep_ctx(request):
    return QContext(request.param, trunc_dim=32)


@pytest.fixture
def rng():
    return np.random.default_rng(Config.SEED)


@pytest.fixture
def client(test_storage):
    from app import create_app

    class TestConfig(Config):
        STORAGE_DIR = test_storage["STORAGE_DIR"]
        OUTPUT_DIR = test_storage["OUTPUT_DIR"]
        DATABASE_URL = test_storage["DATABASE_URL"]
        DIM = 32
        MAX_API_DIM = 64

    app = create_app(TestConfig)
    app.config["TESTING"] = True
    return app.test_client()
