"""Regenerate the bundled meshes and gripper descriptions.

    python3 scripts/make_assets.py [output_dir]
"""

import sys
from pathlib import Path

import yaml

from regrasp.config import DATA_DIR
from regrasp.geometry import shapes
from regrasp.geometry.io import write_obj

MESHES = {
    "cube.obj": lambda: shapes.box((0.06, 0.06, 0.06)),
    "cylinder.obj": lambda: shapes.cylinder_prism(radius=0.03, height=0.05, sides=32),
    "lbracket.obj": lambda: shapes.l_bracket(),
    "stick.obj": lambda: shapes.box((0.03, 0.03, 0.3)),
}

GRIPPERS = {
    "gripper_default.yaml": {"name": "parallel-jaw"},
    # fingers 8 cm wide along the hand y axis: approaches parallel to the
    # table sweep a finger below it, leaving only tilted/top grasps
    "gripper_wide.yaml": {"name": "wide-finger", "finger_box": [0.02, 0.04, 0.004]},
}


def main(out=DATA_DIR):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in MESHES.items():
        mesh = make()
        write_obj(out / name, mesh.vertices, mesh.triangles)
        print(f"{name}: {len(mesh.triangles)} triangles")
    for name, data in GRIPPERS.items():
        (out / name).write_text(yaml.safe_dump(data, sort_keys=False))
        print(name)


if __name__ == "__main__":
    main(*sys.argv[1:])
