import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from official_fixtures import make_official_corpus


@pytest.fixture(scope="session")
def official_root(tmp_path_factory):
    """Official-schema dataset files at the published sizes.

    MIXDISTILL_DATA_DIR overrides with a directory of real files in the
    same layout (svamp/train.json, gsm8k/train.jsonl, asdiv/ASDiv.xml, ...).
    """
    override = os.environ.get("MIXDISTILL_DATA_DIR")
    if override:
        return Path(override)
    root = tmp_path_factory.mktemp("official")
    make_official_corpus(root)
    return root
