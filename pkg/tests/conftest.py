import shutil
from pathlib import Path

import matplotlib
import numpy as np
import pytest
from PIL import Image

matplotlib.use("Agg")

MPL_TTF_DIR = Path(matplotlib.get_data_path()) / "fonts" / "ttf"
FIXTURE_FONTS = [
    "DejaVuSans.ttf",
    "DejaVuSans-Bold.ttf",
    "DejaVuSerif.ttf",
    "DejaVuSansMono.ttf",
    "DejaVuSerif-Italic.ttf",
]

WORDS = [
    "hello", "WORLD", "Market", "signal", "render", "Vector", "planet",
    "orange", "Bridge", "stream", "candle", "Window", "rocket", "silver",
    "Thunder", "meadow", "Fabric", "copper", "lantern", "Harbor", "velvet",
    "Canyon", "mirror", "pepper", "Granite", "saddle", "Willow", "ember",
    "Falcon", "timber", "Quartz", "ribbon", "Summit", "jungle", "Anchor",
    "cobalt", "Prairie", "nutmeg", "Beacon", "tunnel", "Osprey", "walnut",
    "Zephyr", "indigo", "Maple", "hollow", "Russet", "gravel", "Sparrow",
    "bronze", "Tundra", "magnet", "Clover", "puzzle", "Vortex", "saffron",
    "Drift", "kernel", "Plasma", "wander", "Basalt", "octave", "Fjord",
    "relay", "Sierra", "tropic", "Umber", "violet", "Wicker", "xenon",
    "Yonder", "zinnia", "Arcade", "bistro", "Cipher", "dynamo", "Exodus",
    "fresco", "Galley", "hamlet", "Isobar", "jigsaw", "Krypton", "lexicon",
    "Monsoon", "nebula", "Opal", "pylon", "Quiver", "rustic", "Sonnet",
    "trellis", "Upland", "vertex", "Walrus", "yarrow", "Zodiac", "meteor",
]


@pytest.fixture(scope="session")
def fonts_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fonts")
    for name in FIXTURE_FONTS:
        shutil.copy(MPL_TTF_DIR / name, d / name)
    return d


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    path = d / "words.txt"
    path.write_text("\n".join(WORDS) + "\n", encoding="utf-8")
    return path


def _noise_background(rng, w, h):
    # low-frequency blobs so crops vary in luminance, plus texture
    base = rng.integers(20, 235, size=(4, 6, 3))
    img = np.asarray(Image.fromarray(base.astype(np.uint8)).resize((w, h), Image.BILINEAR))
    noise = rng.integers(-18, 19, size=(h, w, 3))
    return np.clip(img.astype(int) + noise, 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def backgrounds_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("backgrounds")
    rng = np.random.default_rng(7)
    for i in range(6):
        w, h = int(rng.integers(280, 640)), int(rng.integers(120, 480))
        Image.fromarray(_noise_background(rng, w, h)).save(d / f"bg_{i:02d}.png")
    return d


@pytest.fixture(scope="session")
def font_set(fonts_dir):
    from syn3dtxt.textraster import load_fonts

    return load_fonts(fonts_dir)


@pytest.fixture(scope="session")
def word_corpus(corpus_file):
    from syn3dtxt.textraster import load_corpus

    return load_corpus(corpus_file)
