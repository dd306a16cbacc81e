import os, sys
from dotenv import load_dotenv
import pytest
from fastapi.testclient import TestClient

# .../app/tests -> subir dos niveles hasta la raíz del repo
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

# Cargar variables de entorno desde .env.local si existe
load_dotenv(os.path.join(ROOT, ".env.local"))

from app.main import app
from app.schemas.net_schema import VictimNetGeometry
from app.schemas.rc_schema import TwoPiModel
from app.services import rlc_decouple


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size corpus and oracle runs (deselect with -m 'not slow')")


@pytest.fixture
def case_a() -> TwoPiModel:
    """Canonical 2-π circuit: tx = 7.5 ps, tv = 17 ps."""
    return TwoPiModel(
        rd=100.0, rs=50.0, re=50.0,
        c1=10e-15, c2=30e-15, cl=20e-15, cx=50e-15,
        tr=100e-12, vdd=1.0,
    )


@pytest.fixture
def geometry() -> VictimNetGeometry:
    return VictimNetGeometry(
        ls_len=100.0, lc_len=200.0, le_len=100.0,
        r_pul=0.1, c_pul=0.2e-15, cc_pul=0.25e-15,
        rd=100.0, cload=5e-15, tr=100e-12,
    )


@pytest.fixture
def inductive_pair():
    """kl=0.769, kc=0.217, ct=0.05, rt=0.25, zeta=1 at the default physical scale."""
    return rlc_decouple.pair_from_normalized(**rlc_decouple.INDUCTIVE_POINT)


@pytest.fixture
def rc_config() -> dict:
    """Case-shaped RC config in boundary units (µm, Ω/µm, fF/µm, Ω, fF, ps)."""
    return {
        "ls_len": 100, "lc_len": 200, "le_len": 100,
        "r_pul": 0.1, "c_pul": 0.2, "cc_pul": 0.25,
        "rd": 100, "cload": 5, "tr": 100,
    }


@pytest.fixture
def client() -> TestClient:
    with TestClient(app) as c:
        yield c
