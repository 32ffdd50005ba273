#!/usr/bin/env python3
"""Regenerate the bundled tree mesh (50 triangles, centered on the y axis).

Square trunk prism (4 quads -> 8 triangles after fan triangulation) plus
three stacked 7-sided cones (7 side + 7 base triangles each).  Deterministic;
run from the repository root:

    python3 scripts/generate_tree_obj.py
"""

import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "difftrace",
                   "assets", "tree.obj")


def main():
    verts = []
    faces = []  # lists of 1-based vertex indices (tris or quads)

    def add_vert(x, y, z):
        verts.append((x, y, z))
        return len(verts)

    # Trunk: square prism, quads (exercises fan triangulation on load).
    hw = 0.18
    y0, y1 = 0.0, 1.2
    corners = [(-hw, -hw), (hw, -hw), (hw, hw), (-hw, hw)]
    bot = [add_vert(x, y0, z) for x, z in corners]
    top = [add_vert(x, y1, z) for x, z in corners]
    for i in range(4):
        j = (i + 1) % 4
        faces.append([bot[i], bot[j], top[j], top[i]])

    # Canopy: three stacked cones, 7 segments each.
    def cone(y_base, radius, y_apex):
        n = 7
        ring = []
        for k in range(n):
            a = 2.0 * math.pi * k / n
            ring.append(add_vert(radius * math.cos(a), y_base,
                                 radius * math.sin(a)))
        apex = add_vert(0.0, y_apex, 0.0)
        center = add_vert(0.0, y_base, 0.0)
        for k in range(n):
            j = (k + 1) % n
            faces.append([apex, ring[k], ring[j]])
            faces.append([center, ring[j], ring[k]])

    cone(1.0, 1.6, 2.4)
    cone(1.8, 1.25, 3.1)
    cone(2.6, 0.9, 4.0)

    tri_count = sum(len(f) - 2 for f in faces)
    assert tri_count == 50, tri_count

    with open(os.path.abspath(OUT), "w", encoding="utf-8") as fh:
        fh.write("# tree stand-in mesh: trunk prism + three stacked cones\n")
        fh.write(f"# {len(verts)} vertices, {tri_count} triangles\n")
        for x, y, z in verts:
            fh.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
        for f in faces:
            fh.write("f " + " ".join(str(i) for i in f) + "\n")
    print(f"wrote {os.path.abspath(OUT)} ({tri_count} triangles)")


if __name__ == "__main__":
    main()
