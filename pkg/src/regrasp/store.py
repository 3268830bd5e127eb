"""Relational persistence of the precomputed planning data (sqlite3).

The ten tables below are the contract. Poses are stored as text holding 12
numbers (row-major rotation, then translation) printed with 17 significant
digits, which round-trips every finite double exactly. Contact points and
normals use the same encoding with 3 numbers.
"""

import csv
import sqlite3
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

TABLES = (
    "object",
    "robot",
    "freeairgrip",
    "freetabletopplacement",
    "freetabletopgrip",
    "angle",
    "tabletopplacements",
    "tabletopgrips",
    "ikret",
    "ik",
)

SCHEMA = """
CREATE TABLE object (
    idobject INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE
);
CREATE TABLE robot (
    idrobot INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE
);
CREATE TABLE freeairgrip (
    idfreeairgrip INTEGER PRIMARY KEY,
    idobject INTEGER NOT NULL REFERENCES object(idobject),
    contactpoint0 TEXT NOT NULL,
    contactpoint1 TEXT NOT NULL,
    contactnormal0 TEXT NOT NULL,
    contactnormal1 TEXT NOT NULL,
    rotmat TEXT NOT NULL,
    jawwidth REAL NOT NULL
);
CREATE TABLE freetabletopplacement (
    id INTEGER PRIMARY KEY,
    idobject INTEGER NOT NULL REFERENCES object(idobject),
    rotmat TEXT NOT NULL
);
CREATE TABLE freetabletopgrip (
    id INTEGER PRIMARY KEY,
    idfreeairgrip INTEGER NOT NULL REFERENCES freeairgrip(idfreeairgrip),
    idfreetabletopplacement INTEGER NOT NULL REFERENCES freetabletopplacement(id),
    contactpoint0 TEXT NOT NULL,
    contactpoint1 TEXT NOT NULL,
    contactnormal0 TEXT NOT NULL,
    contactnormal1 TEXT NOT NULL,
    rotmat TEXT NOT NULL,
    jawwidth REAL NOT NULL
);
CREATE TABLE angle (
    idangle INTEGER PRIMARY KEY,
    value REAL NOT NULL
);
CREATE TABLE tabletopplacements (
    id INTEGER PRIMARY KEY,
    idfreetabletopplacement INTEGER NOT NULL REFERENCES freetabletopplacement(id),
    idangle INTEGER NOT NULL REFERENCES angle(idangle),
    tabletopposition TEXT NOT NULL,
    rotmat TEXT NOT NULL
);
CREATE TABLE tabletopgrips (
    id INTEGER PRIMARY KEY,
    idtabletopplacements INTEGER NOT NULL REFERENCES tabletopplacements(id),
    idfreeairgrip INTEGER NOT NULL REFERENCES freeairgrip(idfreeairgrip),
    contactpoint0 TEXT NOT NULL,
    contactpoint1 TEXT NOT NULL,
    contactnormal0 TEXT NOT NULL,
    contactnormal1 TEXT NOT NULL,
    rotmat TEXT NOT NULL,
    jawwidth REAL NOT NULL
);
CREATE TABLE ikret (
    id INTEGER PRIMARY KEY,
    handx_distance REAL NOT NULL,
    worldz_distance REAL NOT NULL
);
CREATE TABLE ik (
    idrobot INTEGER NOT NULL REFERENCES robot(idrobot),
    idtabletopgrips INTEGER NOT NULL REFERENCES tabletopgrips(id),
    feasibility INTEGER NOT NULL,
    feasibility_handx INTEGER NOT NULL,
    feasibility_handxworldz INTEGER NOT NULL,
    PRIMARY KEY (idrobot, idtabletopgrips)
);
"""

# lookup indices; not part of the table contract
INDICES = """
CREATE INDEX IF NOT EXISTS idx_freeairgrip_object ON freeairgrip(idobject);
CREATE INDEX IF NOT EXISTS idx_ftp_object ON freetabletopplacement(idobject);
CREATE INDEX IF NOT EXISTS idx_ftg_grip ON freetabletopgrip(idfreeairgrip);
CREATE INDEX IF NOT EXISTS idx_ttp_free ON tabletopplacements(idfreetabletopplacement);
CREATE INDEX IF NOT EXISTS idx_ttg_placement ON tabletopgrips(idtabletopplacements);
CREATE INDEX IF NOT EXISTS idx_ttg_grip ON tabletopgrips(idfreeairgrip);
CREATE INDEX IF NOT EXISTS idx_ik_grip ON ik(idtabletopgrips);
"""


class StoreError(Exception):
    pass


class MigrationRequiredError(StoreError):
    pass


class ReferentialIntegrityError(StoreError):
    pass


class UnknownObjectError(StoreError, KeyError):
    pass


def encode_numbers(values):
    return " ".join("%.17g" % v for v in np.asarray(values, dtype=float).ravel())


def encode_pose(T):
    T = np.asarray(T, dtype=float)
    return encode_numbers(np.concatenate([T[:3, :3].ravel(), T[:3, 3]]))


def _encode_rows(values, width):
    """``encode_numbers`` for each row of an ``(n, width)`` array, formatted in one pass."""
    fmt = " ".join(["%.17g"] * width)
    return [fmt % tuple(r) for r in np.asarray(values, dtype=float).reshape(-1, width).tolist()]


def _encode_poses(poses):
    P = np.asarray(poses, dtype=float).reshape(-1, 4, 4)
    return _encode_rows(np.concatenate([P[:, :3, :3].reshape(-1, 9), P[:, :3, 3]], axis=1), 12)


def decode_numbers(text):
    return np.array([float(v) for v in text.split()])


def decode_pose(text):
    v = decode_numbers(text)
    if v.shape != (12,):
        raise StoreError(f"malformed pose text: {text!r}")
    T = np.eye(4)
    T[:3, :3] = v[:9].reshape(3, 3)
    T[:3, 3] = v[9:]
    return T


def _decode_poses(texts):
    """Vectorised decode of many pose strings into ``(n, 4, 4)``."""
    n = len(texts)
    out = np.zeros((n, 4, 4))
    out[:, 3, 3] = 1.0
    if n == 0:
        return out
    v = np.array(" ".join(texts).split(), dtype=float).reshape(n, 12)
    out[:, :3, :3] = v[:, :9].reshape(n, 3, 3)
    out[:, :3, 3] = v[:, 9:]
    return out


def _decode_vectors(texts):
    if len(texts) == 0:
        return np.zeros((0, 3))
    return np.array(" ".join(texts).split(), dtype=float).reshape(len(texts), 3)


class Store:
    """An open store file. Use :func:`init_store` to create or open one."""

    def __init__(self, path, conn):
        self.path = path
        self.conn = conn

    def close(self):
        self.conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def execute(self, sql, params=()):
        return self.conn.execute(sql, params)

    def counts(self):
        return {t: self.execute(f"SELECT COUNT(*) FROM {t}").fetchone()[0] for t in TABLES}


def _connect(path):
    conn = sqlite3.connect(str(path), isolation_level=None)
    conn.execute("PRAGMA foreign_keys = ON")
    return conn


def _table_signature(conn, table):
    cols = conn.execute(f"PRAGMA table_info({table})").fetchall()
    fks = conn.execute(f"PRAGMA foreign_key_list({table})").fetchall()
    return (
        tuple(cols),
        tuple(sorted((f[2], f[3], f[4]) for f in fks)),
    )


def _expected_signatures():
    ref = sqlite3.connect(":memory:")
    ref.executescript(SCHEMA)
    sig = {t: _table_signature(ref, t) for t in TABLES}
    ref.close()
    return sig


def _user_tables(conn):
    rows = conn.execute(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%'"
    ).fetchall()
    return {r[0] for r in rows}


def check_schema(conn):
    """Raise :class:`MigrationRequiredError` unless the file holds exactly our schema."""
    version = conn.execute("PRAGMA user_version").fetchone()[0]
    if version != SCHEMA_VERSION:
        raise MigrationRequiredError(
            f"store schema version {version}, this build needs {SCHEMA_VERSION}"
        )
    tables = _user_tables(conn)
    if tables != set(TABLES):
        extra = sorted(tables - set(TABLES))
        missing = sorted(set(TABLES) - tables)
        raise MigrationRequiredError(f"table set differs (extra {extra}, missing {missing})")
    expected = _expected_signatures()
    for t in TABLES:
        if _table_signature(conn, t) != expected[t]:
            raise MigrationRequiredError(f"table {t!r} does not match the expected columns")


def init_store(path):
    """Create the ten tables in a new file, or open and verify an existing one."""
    path = Path(path)
    try:
        conn = _connect(path)
        if not _user_tables(conn) and conn.execute("PRAGMA user_version").fetchone()[0] == 0:
            conn.executescript(f"BEGIN;{SCHEMA}PRAGMA user_version = {SCHEMA_VERSION};COMMIT;")
        check_schema(conn)
        conn.executescript(INDICES)
    except sqlite3.DatabaseError as exc:
        raise StoreError(f"cannot open store {path}: {exc}") from None
    except MigrationRequiredError:
        conn.close()
        raise
    return Store(path, conn)


def open_store(path):
    """Open an existing store; missing files are an error rather than created."""
    if not Path(path).is_file():
        raise StoreError(f"store not found: {path}")
    return init_store(path)


@dataclass
class IdMap:
    """In-memory ids mapped to the row ids written for one save."""

    object: int
    freeairgrip: dict = field(default_factory=dict)
    freetabletopplacement: dict = field(default_factory=dict)
    freetabletopgrip: dict = field(default_factory=dict)
    angle: dict = field(default_factory=dict)
    tabletopplacements: dict = field(default_factory=dict)
    tabletopgrips: dict = field(default_factory=dict)
    robot: dict = field(default_factory=dict)
    ikret: int = None


def _next_id(conn, table, col):
    return conn.execute(f"SELECT COALESCE(MAX({col}), 0) + 1 FROM {table}").fetchone()[0]


def _assign(conn, table, col, keys):
    base = _next_id(conn, table, col)
    return {k: base + i for i, k in enumerate(keys)}


def _lookup(mapping, key, what):
    try:
        return mapping[key]
    except KeyError:
        raise ReferentialIntegrityError(f"{what} {key!r} does not exist") from None


def _delete_object(conn, object_id):
    grips = "SELECT g.id FROM tabletopgrips g JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip WHERE f.idobject = ?"
    conn.execute(f"DELETE FROM ik WHERE idtabletopgrips IN ({grips})", (object_id,))
    conn.execute(
        "DELETE FROM tabletopgrips WHERE idfreeairgrip IN "
        "(SELECT idfreeairgrip FROM freeairgrip WHERE idobject = ?)",
        (object_id,),
    )
    conn.execute(
        "DELETE FROM tabletopplacements WHERE idfreetabletopplacement IN "
        "(SELECT id FROM freetabletopplacement WHERE idobject = ?)",
        (object_id,),
    )
    conn.execute(
        "DELETE FROM freetabletopgrip WHERE idfreeairgrip IN "
        "(SELECT idfreeairgrip FROM freeairgrip WHERE idobject = ?)",
        (object_id,),
    )
    conn.execute("DELETE FROM freetabletopplacement WHERE idobject = ?", (object_id,))
    conn.execute("DELETE FROM freeairgrip WHERE idobject = ?", (object_id,))
    conn.execute("DELETE FROM object WHERE idobject = ?", (object_id,))


def _contact_columns(points, normals):
    return (
        encode_numbers(points[0]),
        encode_numbers(points[1]),
        encode_numbers(normals[0]),
        encode_numbers(normals[1]),
    )


def save_pipeline(
    store,
    object_name,
    grasps,
    placements=(),
    placement_grips=(),
    instances=(),
    grips=(),
    angles=(),
    robots=(),
    ik=(),
    retraction=None,
):
    """Write one object's precomputation in a single transaction.

    ``grasps`` are :class:`~regrasp.graspplan.GraspConfig`, ``placements`` and
    ``placement_grips`` come from :mod:`regrasp.placement`, ``instances`` and
    ``grips`` from :func:`~regrasp.placement.tabletop_discretize` and
    ``angles`` is the yaw list indexed by ``TabletopPlacement.angle_id``.
    ``robots`` are names; each :class:`~regrasp.kinematics.IkFeasibility` in
    ``ik`` refers to a robot by its index in that list. An existing object of
    the same name is replaced. Returns an :class:`IdMap`.
    """
    conn = store.conn
    conn.execute("BEGIN IMMEDIATE")
    try:
        ids = _save(conn, object_name, grasps, placements, placement_grips, instances, grips, angles, robots, ik, retraction)
        conn.execute("COMMIT")
    except sqlite3.IntegrityError as exc:
        conn.execute("ROLLBACK")
        raise ReferentialIntegrityError(str(exc)) from None
    except BaseException:
        conn.execute("ROLLBACK")
        raise
    return ids


def _save(conn, object_name, grasps, placements, placement_grips, instances, grips, angles, robots, ik, retraction):
    row = conn.execute("SELECT idobject FROM object WHERE name = ?", (object_name,)).fetchone()
    if row is not None:
        _delete_object(conn, row[0])
    oid = _next_id(conn, "object", "idobject")
    conn.execute("INSERT INTO object (idobject, name) VALUES (?, ?)", (oid, object_name))
    ids = IdMap(object=oid)

    ids.freeairgrip = _assign(conn, "freeairgrip", "idfreeairgrip", [g.id for g in grasps])
    conn.executemany(
        "INSERT INTO freeairgrip VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
        (
            (ids.freeairgrip[g.id], oid)
            + _contact_columns((g.pair.p0, g.pair.p1), (g.pair.n0, g.pair.n1))
            + (encode_pose(g.hand_pose), float(g.jaw_width))
            for g in grasps
        ),
    )

    ids.freetabletopplacement = _assign(conn, "freetabletopplacement", "id", [p.id for p in placements])
    conn.executemany(
        "INSERT INTO freetabletopplacement VALUES (?, ?, ?)",
        ((ids.freetabletopplacement[p.id], oid, encode_pose(p.rotmat)) for p in placements),
    )

    ids.freetabletopgrip = _assign(conn, "freetabletopgrip", "id", [g.id for g in placement_grips])
    conn.executemany(
        "INSERT INTO freetabletopgrip VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
        (
            (
                ids.freetabletopgrip[g.id],
                _lookup(ids.freeairgrip, g.grasp_id, "free grasp"),
                _lookup(ids.freetabletopplacement, g.placement_id, "placement"),
            )
            + _contact_columns(g.contact_points, g.contact_normals)
            + (encode_pose(g.hand_pose), float(g.jaw_width))
            for g in placement_grips
        ),
    )

    # angles are shared between objects; reuse rows holding the same value
    existing = dict(conn.execute("SELECT value, idangle FROM angle").fetchall())
    for k, value in enumerate(angles):
        value = float(value)
        if value not in existing:
            existing[value] = _next_id(conn, "angle", "idangle")
            conn.execute("INSERT INTO angle VALUES (?, ?)", (existing[value], value))
        ids.angle[k] = existing[value]

    ids.tabletopplacements = _assign(conn, "tabletopplacements", "id", [t.id for t in instances])
    conn.executemany(
        "INSERT INTO tabletopplacements VALUES (?, ?, ?, ?, ?)",
        (
            (
                ids.tabletopplacements[t.id],
                _lookup(ids.freetabletopplacement, t.placement_id, "placement"),
                _lookup(ids.angle, t.angle_id, "angle"),
                encode_numbers(t.position[:2]),
                encode_pose(t.world_pose),
            )
            for t in instances
        ),
    )

    ids.tabletopgrips = _assign(conn, "tabletopgrips", "id", [g.id for g in grips])
    n = len(grips)
    cp = _encode_rows([g.contact_points for g in grips], 3) if n else []
    cn = _encode_rows([g.contact_normals for g in grips], 3) if n else []
    poses = _encode_poses([g.hand_pose for g in grips]) if n else []
    conn.executemany(
        "INSERT INTO tabletopgrips VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
        (
            (
                ids.tabletopgrips[g.id],
                _lookup(ids.tabletopplacements, g.tabletopplacement_id, "tabletop placement"),
                _lookup(ids.freeairgrip, g.freeairgrip_id, "free grasp"),
                cp[2 * k],
                cp[2 * k + 1],
                cn[2 * k],
                cn[2 * k + 1],
                poses[k],
                float(g.jaw_width),
            )
            for k, g in enumerate(grips)
        ),
    )

    for k, name in enumerate(robots):
        r = conn.execute("SELECT idrobot FROM robot WHERE name = ?", (name,)).fetchone()
        if r is None:
            rid = _next_id(conn, "robot", "idrobot")
            conn.execute("INSERT INTO robot VALUES (?, ?)", (rid, name))
        else:
            rid = r[0]
        ids.robot[k] = rid

    if retraction is not None:
        hx, wz = float(retraction.handx_distance), float(retraction.worldz_distance)
        r = conn.execute(
            "SELECT id FROM ikret WHERE handx_distance = ? AND worldz_distance = ?", (hx, wz)
        ).fetchone()
        if r is None:
            ids.ikret = _next_id(conn, "ikret", "id")
            conn.execute("INSERT INTO ikret VALUES (?, ?, ?)", (ids.ikret, hx, wz))
        else:
            ids.ikret = r[0]

    conn.executemany(
        "INSERT INTO ik VALUES (?, ?, ?, ?, ?)",
        (
            (
                _lookup(ids.robot, f.robot_id, "robot"),
                _lookup(ids.tabletopgrips, f.tabletopgrip_id, "tabletop grip"),
                int(f.feasibility),
                int(f.feasibility_handx),
                int(f.feasibility_handxworldz),
            )
            for f in ik
        ),
    )
    return ids


# ----------------------------------------------------------------- loading


def object_id(store, name):
    row = store.execute("SELECT idobject FROM object WHERE name = ?", (name,)).fetchone()
    if row is None:
        raise UnknownObjectError(f"object {name!r} not in store")
    return row[0]


def robot_id(store, name):
    row = store.execute("SELECT idrobot FROM robot WHERE name = ?", (name,)).fetchone()
    if row is None:
        raise StoreError(f"robot {name!r} not in store")
    return row[0]


def object_names(store):
    return [r[0] for r in store.execute("SELECT name FROM object ORDER BY idobject")]


def robot_names(store):
    return [r[0] for r in store.execute("SELECT name FROM robot ORDER BY idrobot")]


def _require_object(store, oid):
    if store.execute("SELECT 1 FROM object WHERE idobject = ?", (oid,)).fetchone() is None:
        raise UnknownObjectError(f"object id {oid} not in store")


@dataclass(eq=False)
class GripRows:
    """Columns of a grip-like table as arrays, ordered by row id."""

    ids: np.ndarray
    grasp_ids: np.ndarray  # idfreeairgrip (equals ``ids`` for freeairgrip itself)
    placement_ids: np.ndarray  # owning placement row, -1 for free grasps
    contact_points: np.ndarray  # (n, 2, 3)
    contact_normals: np.ndarray  # (n, 2, 3)
    poses: np.ndarray  # (n, 4, 4)
    jaw_widths: np.ndarray

    def __len__(self):
        return len(self.ids)


def _grip_rows(rows):
    rows = list(rows)
    n = len(rows)
    col = list(zip(*rows)) if rows else [()] * 9
    pts = np.stack([_decode_vectors(col[3]), _decode_vectors(col[4])], axis=1) if n else np.zeros((0, 2, 3))
    nrm = np.stack([_decode_vectors(col[5]), _decode_vectors(col[6])], axis=1) if n else np.zeros((0, 2, 3))
    return GripRows(
        ids=np.array(col[0], dtype=np.int64),
        grasp_ids=np.array(col[1], dtype=np.int64),
        placement_ids=np.array(col[2], dtype=np.int64),
        contact_points=pts,
        contact_normals=nrm,
        poses=_decode_poses(list(col[7])),
        jaw_widths=np.array(col[8], dtype=float),
    )


def load_freeairgrips(store, oid):
    _require_object(store, oid)
    return _grip_rows(
        store.execute(
            "SELECT idfreeairgrip, idfreeairgrip, -1, contactpoint0, contactpoint1, contactnormal0,"
            " contactnormal1, rotmat, jawwidth FROM freeairgrip WHERE idobject = ? ORDER BY idfreeairgrip",
            (oid,),
        )
    )


def load_freetabletopgrips(store, oid):
    _require_object(store, oid)
    return _grip_rows(
        store.execute(
            "SELECT g.id, g.idfreeairgrip, g.idfreetabletopplacement, g.contactpoint0, g.contactpoint1,"
            " g.contactnormal0, g.contactnormal1, g.rotmat, g.jawwidth FROM freetabletopgrip g"
            " JOIN freetabletopplacement p ON g.idfreetabletopplacement = p.id"
            " WHERE p.idobject = ? ORDER BY g.id",
            (oid,),
        )
    )


def load_tabletopgrips(store, oid):
    _require_object(store, oid)
    return _grip_rows(
        store.execute(
            "SELECT g.id, g.idfreeairgrip, g.idtabletopplacements, g.contactpoint0, g.contactpoint1,"
            " g.contactnormal0, g.contactnormal1, g.rotmat, g.jawwidth FROM tabletopgrips g"
            " JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip"
            " WHERE f.idobject = ? ORDER BY g.id",
            (oid,),
        )
    )


def load_placements(store, oid):
    """``(ids, rotmats)`` of the object's free placements."""
    _require_object(store, oid)
    rows = store.execute(
        "SELECT id, rotmat FROM freetabletopplacement WHERE idobject = ? ORDER BY id", (oid,)
    ).fetchall()
    return np.array([r[0] for r in rows], dtype=np.int64), _decode_poses([r[1] for r in rows])


@dataclass(eq=False)
class InstanceRows:
    ids: np.ndarray
    placement_ids: np.ndarray
    angle_ids: np.ndarray
    angles: np.ndarray
    positions: np.ndarray  # (n, 2)
    poses: np.ndarray

    def __len__(self):
        return len(self.ids)


def load_tabletopplacements(store, oid):
    _require_object(store, oid)
    rows = store.execute(
        "SELECT t.id, t.idfreetabletopplacement, t.idangle, a.value, t.tabletopposition, t.rotmat"
        " FROM tabletopplacements t JOIN freetabletopplacement p ON t.idfreetabletopplacement = p.id"
        " JOIN angle a ON t.idangle = a.idangle WHERE p.idobject = ? ORDER BY t.id",
        (oid,),
    ).fetchall()
    col = list(zip(*rows)) if rows else [()] * 6
    pos = (
        np.array(" ".join(col[4]).split(), dtype=float).reshape(-1, 2) if rows else np.zeros((0, 2))
    )
    return InstanceRows(
        ids=np.array(col[0], dtype=np.int64),
        placement_ids=np.array(col[1], dtype=np.int64),
        angle_ids=np.array(col[2], dtype=np.int64),
        angles=np.array(col[3], dtype=float),
        positions=pos,
        poses=_decode_poses(list(col[5])),
    )


def load_angles(store):
    rows = store.execute("SELECT idangle, value FROM angle ORDER BY idangle").fetchall()
    return {r[0]: r[1] for r in rows}


def load_ikret(store):
    return store.execute("SELECT id, handx_distance, worldz_distance FROM ikret ORDER BY id").fetchall()


def load_ik(store, oid, rid):
    """``{tabletopgrip id: (feasibility, handx, handxworldz)}`` for one robot."""
    _require_object(store, oid)
    rows = store.execute(
        "SELECT k.idtabletopgrips, k.feasibility, k.feasibility_handx, k.feasibility_handxworldz"
        " FROM ik k JOIN tabletopgrips g ON k.idtabletopgrips = g.id"
        " JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip"
        " WHERE f.idobject = ? AND k.idrobot = ? ORDER BY k.idtabletopgrips",
        (oid, rid),
    )
    return {r[0]: (bool(r[1]), bool(r[2]), bool(r[3])) for r in rows}


def feasible_grip_ids(store, oid, rid):
    """Tabletop grip ids whose three feasibility flags are all set, ascending."""
    _require_object(store, oid)
    rows = store.execute(
        "SELECT k.idtabletopgrips FROM ik k JOIN tabletopgrips g ON k.idtabletopgrips = g.id"
        " JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip"
        " WHERE f.idobject = ? AND k.idrobot = ? AND k.feasibility AND k.feasibility_handx"
        " AND k.feasibility_handxworldz ORDER BY k.idtabletopgrips",
        (oid, rid),
    )
    return np.array([r[0] for r in rows], dtype=np.int64)


# ----------------------------------------------------------------- joins


def query_shared_grasps(store, oid):
    """Grip pairs sharing ``idfreeairgrip`` across distinct tabletop placements."""
    _require_object(store, oid)
    rows = store.execute(
        "SELECT a.id, b.id FROM tabletopgrips a"
        " JOIN tabletopgrips b ON a.idfreeairgrip = b.idfreeairgrip AND a.id < b.id"
        " JOIN freeairgrip f ON a.idfreeairgrip = f.idfreeairgrip"
        " WHERE f.idobject = ? AND a.idtabletopplacements != b.idtabletopplacements"
        " ORDER BY a.id, b.id",
        (oid,),
    )
    return [tuple(r) for r in rows]


def query_coplaced_grips(store, oid):
    """Grip pairs sharing ``idtabletopplacements``."""
    _require_object(store, oid)
    rows = store.execute(
        "SELECT a.id, b.id FROM tabletopgrips a"
        " JOIN tabletopgrips b ON a.idtabletopplacements = b.idtabletopplacements AND a.id < b.id"
        " JOIN freeairgrip f ON a.idfreeairgrip = f.idfreeairgrip"
        " WHERE f.idobject = ? ORDER BY a.id, b.id",
        (oid,),
    )
    return [tuple(r) for r in rows]


def grip_groups(store, oid, key):
    """Tabletop grip ids grouped by ``key`` ('freeairgrip' or 'placement').

    Every pair inside a group is a row of the corresponding pair join, so
    the groups describe the same relation without materialising cliques.
    """
    _require_object(store, oid)
    col = {"freeairgrip": "g.idfreeairgrip", "placement": "g.idtabletopplacements"}[key]
    rows = store.execute(
        f"SELECT {col}, g.id FROM tabletopgrips g JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip"
        f" WHERE f.idobject = ? ORDER BY {col}, g.id",
        (oid,),
    )
    groups = defaultdict(list)
    for k, gid in rows:
        groups[k].append(gid)
    return dict(groups)


# ----------------------------------------------------------------- audit and export


@dataclass
class AuditReport:
    counts: dict
    problems: list

    @property
    def ok(self):
        return not self.problems


def audit(store):
    """Full foreign-key scan plus the cardinality laws, per object."""
    problems = []
    for table, rowid, parent, _fk in store.execute("PRAGMA foreign_key_check"):
        problems.append(f"{table} row {rowid} references a missing {parent} row")
    counts = store.counts()
    n_robot = counts["robot"]
    for oid, name in store.execute("SELECT idobject, name FROM object ORDER BY idobject").fetchall():
        n_free = store.execute(
            "SELECT COUNT(*) FROM freetabletopplacement WHERE idobject = ?", (oid,)
        ).fetchone()[0]
        n_inst, n_pos, n_ang = store.execute(
            "SELECT COUNT(*), COUNT(DISTINCT t.tabletopposition), COUNT(DISTINCT t.idangle)"
            " FROM tabletopplacements t JOIN freetabletopplacement p ON t.idfreetabletopplacement = p.id"
            " WHERE p.idobject = ?",
            (oid,),
        ).fetchone()
        if n_inst and n_inst != n_free * n_pos * n_ang:
            problems.append(
                f"{name}: {n_inst} tabletop placements != {n_free} x {n_pos} positions x {n_ang} angles"
            )
        # every tabletop grip is a free-placement grip re-posed on an instance
        n_ttg = store.execute(
            "SELECT COUNT(*) FROM tabletopgrips g JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip"
            " WHERE f.idobject = ?",
            (oid,),
        ).fetchone()[0]
        expected = store.execute(
            "SELECT COALESCE(SUM(c), 0) FROM (SELECT (SELECT COUNT(*) FROM freetabletopgrip g"
            " WHERE g.idfreetabletopplacement = t.idfreetabletopplacement) AS c"
            " FROM tabletopplacements t JOIN freetabletopplacement p ON t.idfreetabletopplacement = p.id"
            " WHERE p.idobject = ?)",
            (oid,),
        ).fetchone()[0]
        if n_ttg != expected:
            problems.append(f"{name}: {n_ttg} tabletop grips, placement grips imply {expected}")
        mixed = store.execute(
            "SELECT COUNT(*) FROM tabletopgrips g JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip"
            " JOIN tabletopplacements t ON g.idtabletopplacements = t.id"
            " JOIN freetabletopplacement p ON t.idfreetabletopplacement = p.id"
            " WHERE f.idobject = ? AND p.idobject != f.idobject",
            (oid,),
        ).fetchone()[0]
        if mixed:
            problems.append(f"{name}: {mixed} grips pair a grasp with another object's placement")
    if counts["ik"] > n_robot * counts["tabletopgrips"]:
        problems.append("ik has more rows than robots x tabletop grips")
    return AuditReport(counts=counts, problems=problems)


_ORDER = {
    "object": "idobject",
    "robot": "idrobot",
    "freeairgrip": "idfreeairgrip",
    "angle": "idangle",
    "ik": "idrobot, idtabletopgrips",
}


def export_csv(store, directory):
    """One ``<table>.csv`` per table, header row first, rows in key order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for table in TABLES:
        cur = store.execute(f"SELECT * FROM {table} ORDER BY {_ORDER.get(table, 'id')}")
        path = directory / f"{table}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([d[0] for d in cur.description])
            for row in cur:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        paths.append(path)
    return paths
