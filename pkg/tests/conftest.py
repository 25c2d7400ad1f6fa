import json
import random
import sys
from pathlib import Path

import pytest

from irfs import load_dataset

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def mini_path():
    return DATA / "mini.json"


@pytest.fixture
def mini_coco(mini_path):
    return json.loads(mini_path.read_text())


@pytest.fixture
def mini_ds(mini_path):
    return load_dataset(mini_path)


def random_coco(seed, max_images=50, max_annotations=200, max_categories=8):
    """Small random COCO dict built with the stdlib RNG (no package code)."""
    rng = random.Random(seed)
    n_img = rng.randint(1, max_images)
    n_cat = rng.randint(1, max_categories)
    n_ann = rng.randint(1, max_annotations)
    image_ids = rng.sample(range(1, 10 * n_img + 1), n_img)
    cat_ids = rng.sample(range(1, 10 * n_cat + 1), n_cat)
    # skewed category choice so some categories stay rare or empty
    weights = [1.0 / (k + 1) ** 2 for k in range(n_cat)]
    anns = []
    for a in range(n_ann):
        anns.append(
            {
                "id": a + 1,
                "image_id": rng.choice(image_ids),
                "category_id": rng.choices(cat_ids, weights)[0],
            }
        )
    return {
        "images": [{"id": i} for i in image_ids],
        "annotations": anns,
        "categories": [{"id": c, "name": f"c{c}"} for c in cat_ids],
    }


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name="ann.json"):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return p

    return _write


# (criterion, description, passed) rows appended by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, desc, ok in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {desc}")
