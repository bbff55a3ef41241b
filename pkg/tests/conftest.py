import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from minicorpus import PROBLEMS_DIR, mini_pairs  # noqa: E402

from minrepair import judge as judge_mod  # noqa: E402
from minrepair import tokenizer as bpe  # noqa: E402


@pytest.fixture(scope="session")
def problems():
    return judge_mod.load_problems(PROBLEMS_DIR)


@pytest.fixture(scope="session")
def pairs():
    return mini_pairs()


@pytest.fixture(scope="session")
def mini_tokenizer(pairs):
    texts = [t for p in pairs for t in (p.wrong_source, p.correct_source)]
    return bpe.train_bpe(texts, vocab_size=320)


@pytest.fixture(scope="session")
def problems_by_pair(pairs, problems):
    return {p.pair_id: problems[p.problem_id] for p in pairs}
