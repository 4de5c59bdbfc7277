"""Write demos/scenario.json and demos/scene.json for the command-line walkthrough."""

import json
from pathlib import Path

from dsgtrack.sim import NoiseSpec, drawer_scenario, save_scenario

here = Path(__file__).parent
sc = drawer_scenario(NoiseSpec(pixel_sigma=2.0, hand_sigma=0.005))
(here / "scene.json").write_text(json.dumps(sc.scene))
sc.scene = "scene.json"
save_scenario(sc, here / "scenario.json")
print("wrote", here / "scene.json", "and", here / "scenario.json")
