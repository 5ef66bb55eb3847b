"""File formats: PLY meshes and Gaussian clouds, bound-asset containers, PNG.

Gaussian clouds use the splatting community's binary point layout (normals
slot, SH DC color terms, logit opacity, log scales, raw quaternion) so any
standard viewer opens them. Unknown extra properties survive a load/save
round trip untouched.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..bind import bake_free_cloud, face_frames
from ..core import BoundAsset, ColoredMesh, GaussianCloud3D

# zeroth spherical harmonic; community files store (color - 0.5) / SH_C0
SH_C0 = 0.28209479177387814

_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "short": "i2", "ushort": "u2",
    "int": "i4", "uint": "u4", "float": "f4", "double": "f8",
    "int8": "i1", "uint8": "u1", "int16": "i2", "uint16": "u2",
    "int32": "i4", "uint32": "u4", "float32": "f4", "float64": "f8",
}
_PLY_NAMES = {"i1": "char", "u1": "uchar", "i2": "short", "u2": "ushort",
              "i4": "int", "u4": "uint", "f4": "float", "f8": "double"}

CLOUD_PROPERTIES = ("x", "y", "z", "nx", "ny", "nz",
                    "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                    "scale_0", "scale_1", "scale_2",
                    "rot_0", "rot_1", "rot_2", "rot_3")

GDBA_MAGIC = b"GDBA"
GDBA_VERSION = 1


@dataclass
class _Element:
    name: str
    count: int
    scalars: list        # [(name, numpy type code)]
    list_prop: tuple = None   # (count type code, item type code, name)


def _parse_ply_header(data: bytes, path):
    if not data.startswith(b"ply"):
        raise ValueError(f"{path}: not a PLY file (byte 0 does not start 'ply')")
    end = data.find(b"end_header\n")
    if end < 0:
        raise ValueError(f"{path}: no end_header line in the first "
                         f"{len(data)} bytes")
    body_offset = end + len(b"end_header\n")
    elements = []
    offset = 0
    for raw in data[:end].split(b"\n"):
        line = raw.decode("ascii", "replace").strip()
        at = offset
        offset += len(raw) + 1
        if not line or line == "ply" or line.startswith("comment"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise ValueError(f"{path}: unsupported format {parts[1]!r} "
                                 f"at byte {at}")
        elif parts[0] == "element":
            elements.append(_Element(parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ValueError(f"{path}: property before any element "
                                 f"at byte {at}")
            if parts[1] == "list":
                ctype, itype = parts[2], parts[3]
                if ctype not in _PLY_TYPES or itype not in _PLY_TYPES:
                    raise ValueError(f"{path}: unknown list types in "
                                     f"{line!r} at byte {at}")
                elements[-1].list_prop = (_PLY_TYPES[ctype],
                                          _PLY_TYPES[itype], parts[4])
            else:
                if parts[1] not in _PLY_TYPES:
                    raise ValueError(f"{path}: unknown property type "
                                     f"{parts[1]!r} at byte {at}")
                elements[-1].scalars.append((parts[2], _PLY_TYPES[parts[1]]))
        elif parts[0] == "end_header":
            break
        else:
            raise ValueError(f"{path}: unexpected header line {line!r} "
                             f"at byte {at}")
    return elements, body_offset


def _read_ply(path):
    path = Path(path)
    data = path.read_bytes()
    elements, offset = _parse_ply_header(data, path)
    out = {}
    for el in elements:
        if el.list_prop is not None:
            if el.scalars:
                raise ValueError(f"{path}: element '{el.name}' mixes list "
                                 f"and scalar properties")
            ctype, itype, _ = el.list_prop
            if el.count == 0:
                out[el.name] = np.zeros((0, 3), dtype="<" + itype)
                continue
            arity = int(np.frombuffer(data, dtype="<" + ctype, count=1,
                                      offset=offset)[0])
            if arity != 3:
                raise ValueError(f"{path}: element '{el.name}' has arity "
                                 f"{arity} at byte {offset}, only triangles "
                                 f"are supported")
            dt = np.dtype([("n", "<" + ctype), ("v", "<" + itype, (3,))])
            nbytes = dt.itemsize * el.count
            if offset + nbytes > len(data):
                raise ValueError(
                    f"{path}: element '{el.name}' wants {nbytes} bytes at "
                    f"byte {offset}, only {len(data) - offset} remain")
            rows = np.frombuffer(data, dtype=dt, count=el.count, offset=offset)
            if not np.all(rows["n"] == 3):
                raise ValueError(f"{path}: element '{el.name}' mixes "
                                 f"polygon arities, only triangles are "
                                 f"supported")
            out[el.name] = rows["v"]
            offset += nbytes
        else:
            dt = np.dtype([(n, "<" + t) for n, t in el.scalars])
            nbytes = dt.itemsize * el.count
            if offset + nbytes > len(data):
                raise ValueError(
                    f"{path}: element '{el.name}' wants {nbytes} bytes at "
                    f"byte {offset}, only {len(data) - offset} remain")
            out[el.name] = np.frombuffer(data, dtype=dt, count=el.count,
                                         offset=offset)
            offset += nbytes
    return out


def _write_ply(path, elements):
    """elements: [(name, header property lines, payload bytes, count)]."""
    header = ["ply", "format binary_little_endian 1.0"]
    for name, props, _, count in elements:
        header.append(f"element {name} {count}")
        header.extend(props)
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        for _, _, payload, _ in elements:
            fh.write(payload)


def save_mesh(path, mesh: ColoredMesh) -> None:
    """Binary PLY with float vertex colors and triangle faces."""
    vdt = np.dtype([(n, "<f4") for n in
                    ("x", "y", "z", "red", "green", "blue")])
    verts = np.empty(mesh.n_vertices, dtype=vdt)
    for i, n in enumerate(("x", "y", "z")):
        verts[n] = mesh.vertices[:, i].astype("<f4")
    for i, n in enumerate(("red", "green", "blue")):
        verts[n] = mesh.colors[:, i].astype("<f4")
    fdt = np.dtype([("n", "u1"), ("v", "<i4", (3,))])
    faces = np.empty(mesh.n_faces, dtype=fdt)
    faces["n"] = 3
    faces["v"] = mesh.faces.astype("<i4")
    _write_ply(path, [
        ("vertex", [f"property float {n}" for n in vdt.names],
         verts.tobytes(), mesh.n_vertices),
        ("face", ["property list uchar int vertex_indices"],
         faces.tobytes(), mesh.n_faces),
    ])


def load_mesh(path) -> ColoredMesh:
    """Load a triangle mesh; uchar colors are rescaled, missing ones gray."""
    parsed = _read_ply(path)
    if "vertex" not in parsed or "face" not in parsed:
        raise ValueError(f"{path}: mesh needs vertex and face elements, "
                         f"found {sorted(parsed)}")
    vert = parsed["vertex"]
    for n in ("x", "y", "z"):
        if n not in vert.dtype.names:
            raise ValueError(f"{path}: vertex element lacks property '{n}'")
    vertices = np.stack([vert[n].astype(np.float64)
                         for n in ("x", "y", "z")], axis=1)
    if all(n in vert.dtype.names for n in ("red", "green", "blue")):
        cols = [vert[n] for n in ("red", "green", "blue")]
        if cols[0].dtype == np.uint8:
            colors = np.stack(cols, axis=1).astype(np.float64) / 255.0
        else:
            colors = np.stack([c.astype(np.float64) for c in cols], axis=1)
    else:
        colors = np.full((len(vertices), 3), 0.5)
    return ColoredMesh(vertices, parsed["face"].astype(np.int64), colors)


def save_gaussian_cloud(path, cloud: GaussianCloud3D, extras: dict = None) -> None:
    """Community point layout, all float32; extras appended verbatim."""
    n = len(cloud.positions)
    cols = {
        "x": cloud.positions[:, 0], "y": cloud.positions[:, 1],
        "z": cloud.positions[:, 2],
        "nx": np.zeros(n), "ny": np.zeros(n), "nz": np.zeros(n),
        "f_dc_0": (cloud.colors[:, 0] - 0.5) / SH_C0,
        "f_dc_1": (cloud.colors[:, 1] - 0.5) / SH_C0,
        "f_dc_2": (cloud.colors[:, 2] - 0.5) / SH_C0,
        "opacity": cloud.opacities,
        "scale_0": cloud.log_scales[:, 0], "scale_1": cloud.log_scales[:, 1],
        "scale_2": cloud.log_scales[:, 2],
        "rot_0": cloud.rotations[:, 0], "rot_1": cloud.rotations[:, 1],
        "rot_2": cloud.rotations[:, 2], "rot_3": cloud.rotations[:, 3],
    }
    extras = extras or {}
    fields = [(name, "f4") for name in CLOUD_PROPERTIES]
    for name, arr in extras.items():
        arr = np.asarray(arr)
        if arr.shape != (n,):
            raise ValueError(f"extra property '{name}' has shape {arr.shape},"
                             f" expected ({n},)")
        fields.append((name, arr.dtype.str.lstrip("<>=|")))
    dt = np.dtype([(name, "<" + code) for name, code in fields])
    rows = np.empty(n, dtype=dt)
    for name in CLOUD_PROPERTIES:
        rows[name] = cols[name].astype("<f4")
    for name, arr in extras.items():
        rows[name] = arr
    props = [f"property {_PLY_NAMES[code]} {name}" for name, code in fields]
    _write_ply(path, [("vertex", props, rows.tobytes(), n)])


def load_gaussian_cloud(path):
    """Returns (cloud, extras); extras keep their on-disk dtypes."""
    parsed = _read_ply(path)
    if "vertex" not in parsed:
        raise ValueError(f"{path}: point cloud needs a vertex element")
    vert = parsed["vertex"]
    for name in CLOUD_PROPERTIES:
        if name not in vert.dtype.names:
            raise ValueError(f"{path}: vertex element lacks property "
                             f"'{name}' of the splatting layout")
    get = lambda n: vert[n].astype(np.float64)
    cloud = GaussianCloud3D(
        positions=np.stack([get("x"), get("y"), get("z")], axis=1),
        colors=np.stack([get(f"f_dc_{i}") * SH_C0 + 0.5 for i in range(3)],
                        axis=1),
        opacities=get("opacity"),
        log_scales=np.stack([get(f"scale_{i}") for i in range(3)], axis=1),
        rotations=np.stack([get(f"rot_{i}") for i in range(4)], axis=1),
    )
    extras = {name: np.array(vert[name]) for name in vert.dtype.names
              if name not in CLOUD_PROPERTIES}
    return cloud, extras


def _asset_stem(path) -> Path:
    path = Path(path)
    name = path.name
    for suffix in (".gdba", ".mesh.ply", ".baked.ply"):
        if name.endswith(suffix):
            return path.with_name(name[:-len(suffix)])
    return path


def save_bound_asset(path, asset: BoundAsset) -> Path:
    """Write the asset triple: mesh PLY, attribute container, baked cloud.

    Returns the stem; the files are <stem>.mesh.ply, <stem>.gdba and
    <stem>.baked.ply (the last one for plain splat viewers).
    """
    stem = _asset_stem(path)
    save_mesh(stem.with_name(stem.name + ".mesh.ply"), asset.mesh)
    # the barycentric template is structural: quantizing it to f32 would
    # break the rows-sum-to-1 invariant, so it alone stays f64
    arrays = [("weights", asset.weights, "<f8"),
              ("colors", asset.colors, "<f4"),
              ("opacities", asset.opacities, "<f4"),
              ("log_scales", asset.log_scales, "<f4"),
              ("rotations_2d", asset.rotations_2d, "<f4")]
    header = {"version": GDBA_VERSION, "n_per_face": asset.n_per_face,
              "arrays": [{"name": n, "shape": list(a.shape), "dtype": d}
                         for n, a, d in arrays]}
    blob = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("ascii")
    with open(stem.with_name(stem.name + ".gdba"), "wb") as fh:
        fh.write(GDBA_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr, dtype in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())
    save_gaussian_cloud(stem.with_name(stem.name + ".baked.ply"),
                        bake_free_cloud(asset))
    return stem


def load_bound_asset(path) -> BoundAsset:
    stem = _asset_stem(path)
    mesh = load_mesh(stem.with_name(stem.name + ".mesh.ply"))
    container = stem.with_name(stem.name + ".gdba")
    data = Path(container).read_bytes()
    if data[:4] != GDBA_MAGIC:
        raise ValueError(f"{container}: not a bound-asset container "
                         f"(magic {data[:4]!r} at byte 0)")
    if len(data) < 8:
        raise ValueError(f"{container}: truncated inside the fixed header, "
                         f"8 bytes needed, {len(data)} present")
    (hlen,) = struct.unpack_from("<I", data, 4)
    if 8 + hlen > len(data):
        raise ValueError(f"{container}: header wants {hlen} bytes at byte 8, "
                         f"only {len(data) - 8} remain")
    try:
        header = json.loads(data[8:8 + hlen].decode("ascii"))
    except (ValueError, UnicodeDecodeError) as e:
        raise ValueError(f"{container}: header is not valid JSON: {e}")
    if header.get("version") != GDBA_VERSION:
        raise ValueError(f"{container}: unsupported version "
                         f"{header.get('version')}")
    offset = 8 + hlen
    fields = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        dtype = np.dtype(spec.get("dtype", "<f4"))
        if dtype.str not in ("<f4", "<f8"):
            raise ValueError(f"{container}: array '{spec['name']}' has "
                             f"unsupported dtype {dtype.str}")
        nbytes = int(np.prod(shape)) * dtype.itemsize
        if offset + nbytes > len(data):
            raise ValueError(
                f"{container}: array '{spec['name']}' wants {nbytes} bytes "
                f"at byte {offset}, only {len(data) - offset} remain")
        fields[spec["name"]] = np.frombuffer(
            data, dtype=dtype, count=int(np.prod(shape)),
            offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    for need in ("weights", "colors", "opacities", "log_scales",
                 "rotations_2d"):
        if need not in fields:
            raise ValueError(f"{container}: header lacks array '{need}'")
    return BoundAsset(mesh=mesh, weights=fields["weights"],
                      colors=fields["colors"], opacities=fields["opacities"],
                      log_scales=fields["log_scales"],
                      rotations_2d=fields["rotations_2d"],
                      frames=face_frames(mesh.vertices, mesh.faces))


def save_png(path, image: np.ndarray) -> None:
    """Image in [0, 1], shape (H, W, 3), written as 8-bit RGB."""
    u8 = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(u8, "RGB").save(path)


def load_png(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
