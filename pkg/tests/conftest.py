import pytest

from polydegrade import datagen


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """A small generated dataset shared by service/CLI tests: 24 records."""
    root = tmp_path_factory.mktemp("tiny_dataset")
    config = datagen.GenerationConfig(
        classes=(3, 4),
        per_class_whole=4,
        degradation_grid=(0.5,),
        kinds=("corner", "edge"),
        master_seed=77,
        output_dir=str(root),
    )
    manifest = datagen.generate_dataset(config)
    return config, manifest, root
