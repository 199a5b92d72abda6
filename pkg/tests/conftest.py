import pytest

from hdma import datastore
from hdma.distest import Centroid, PairSpec, Point
from hdma.encode import FeatureVector, Profile

TABLE1_CSV = """\
ID,Feature1,Feature2,Cluster,Role
0,-0.5,0.5,blue,centroid
1,0.2,-0.2,green,centroid
2,0.15,-0.15,,point
3,-0.45,0.45,,point
"""

TABLE3_CSV = """\
ID,Feature1,Feature2,Cluster,Role
0,-0.5,0.5,blue,centroid
1,0.2,-0.2,green,centroid
2,0.15,-0.15,green,point
3,-0.45,0.45,blue,point
"""

CENTROID_A = Centroid(0, FeatureVector(-0.5, 0.5), "blue")
CENTROID_B = Centroid(1, FeatureVector(0.2, -0.2), "green")
POINT_2 = Point(2, FeatureVector(0.15, -0.15))
POINT_3 = Point(3, FeatureVector(-0.45, 0.45))
TABLE1_PAIRS = {
    (2, 0): PairSpec(POINT_2, CENTROID_A),
    (2, 1): PairSpec(POINT_2, CENTROID_B),
    (3, 0): PairSpec(POINT_3, CENTROID_A),
    (3, 1): PairSpec(POINT_3, CENTROID_B),
}


@pytest.fixture
def table1_path(tmp_path):
    path = tmp_path / "table1.csv"
    path.write_text(TABLE1_CSV, encoding="utf-8")
    return path


@pytest.fixture
def table1():
    return datastore.loads(TABLE1_CSV)


@pytest.fixture
def profile():
    return Profile(id_bit_width=2)
