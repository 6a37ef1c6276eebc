import importlib.resources

import pytest

TOY_KEYS = """\
task = node_classification
triples_path = {data}/toy_nc_triples.tsv
labels_path = {data}/toy_nc_labels.tsv
train_nodes_path = {data}/toy_nc_train.txt
test_nodes_path = {data}/toy_nc_test.txt
add_self_loop = true
dropout = 0.0
seeds = 0
"""


@pytest.fixture
def toy_config(tmp_path):
    """A config file for the bundled 12-node toy classification dataset."""
    data = importlib.resources.files("brgcn.data")
    path = tmp_path / "toy.cfg"
    path.write_text(TOY_KEYS.format(data=data) + f"output_dir = {tmp_path / 'out'}\n")
    return path
