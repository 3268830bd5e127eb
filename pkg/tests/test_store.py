import sqlite3

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hst

from oracles import nested_loop_pairs
from regrasp import store as st
from regrasp.kinematics import IkFeasibility, RetractionSpec


def _flags(grips, robots=("arm6", "arm7"), seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for r in range(len(robots)):
        for g in grips:
            a, b, c = rng.random(3) < 0.7
            out.append(IkFeasibility(r, g.id, bool(a), bool(b), bool(c)))
    return out


def _save(store, pl, name="cube", robots=("arm6", "arm7"), **kw):
    flat = [g for p in pl.placements for g in pl.placement_grips[p.id]]
    args = dict(
        placements=pl.placements,
        placement_grips=flat,
        instances=pl.instances,
        grips=pl.grips,
        angles=pl.angles,
        robots=list(robots),
        ik=_flags(pl.grips, robots),
        retraction=RetractionSpec(0.05, 0.05),
    )
    args.update(kw)
    return st.save_pipeline(store, name, pl.grasps, **args)


@pytest.fixture
def saved(tmp_path, cube_pipeline):
    store = st.init_store(tmp_path / "s.db")
    ids = _save(store, cube_pipeline)
    yield store, ids
    store.close()


# ----------------------------------------------------------------- schema


def test_fresh_store_has_exactly_ten_tables(tmp_path):
    with st.init_store(tmp_path / "a.db") as s:
        names = {r[0] for r in s.execute("SELECT name FROM sqlite_master WHERE type = 'table'")}
        assert names == set(st.TABLES) and len(names) == 10
        assert s.execute("PRAGMA user_version").fetchone()[0] == st.SCHEMA_VERSION
        assert all(n == 0 for n in s.counts().values())


def test_reopen_is_idempotent(tmp_path):
    st.init_store(tmp_path / "a.db").close()
    with st.init_store(tmp_path / "a.db") as s:
        assert set(s.counts()) == set(st.TABLES)


def test_extra_column_needs_migration(tmp_path):
    st.init_store(tmp_path / "a.db").close()
    conn = sqlite3.connect(tmp_path / "a.db")
    conn.execute("ALTER TABLE angle ADD COLUMN note TEXT")
    conn.commit()
    conn.close()
    with pytest.raises(st.MigrationRequiredError):
        st.init_store(tmp_path / "a.db")


def test_extra_table_or_version_needs_migration(tmp_path):
    st.init_store(tmp_path / "a.db").close()
    conn = sqlite3.connect(tmp_path / "a.db")
    conn.execute("CREATE TABLE notes (x)")
    conn.commit()
    conn.close()
    with pytest.raises(st.MigrationRequiredError):
        st.init_store(tmp_path / "a.db")
    st.init_store(tmp_path / "b.db").close()
    conn = sqlite3.connect(tmp_path / "b.db")
    conn.execute("PRAGMA user_version = 7")
    conn.close()
    with pytest.raises(st.MigrationRequiredError):
        st.init_store(tmp_path / "b.db")


def test_foreign_schema_file(tmp_path):
    conn = sqlite3.connect(tmp_path / "other.db")
    conn.execute("CREATE TABLE object (x)")
    conn.commit()
    conn.close()
    with pytest.raises(st.MigrationRequiredError):
        st.init_store(tmp_path / "other.db")
    (tmp_path / "junk.db").write_bytes(b"not a database" * 100)
    with pytest.raises(st.StoreError):
        st.init_store(tmp_path / "junk.db")
    with pytest.raises(st.StoreError):
        st.open_store(tmp_path / "missing.db")


# ----------------------------------------------------------------- encoding


@given(hst.lists(hst.floats(allow_nan=False, allow_infinity=False, width=64), min_size=12, max_size=12))
def test_pose_text_round_trip_is_exact(values):
    T = np.eye(4)
    T[:3, :3] = np.reshape(values[:9], (3, 3))
    T[:3, 3] = values[9:]
    back = st.decode_pose(st.encode_pose(T))
    assert np.array_equal(back, T)
    assert np.array_equal(st._decode_poses([st.encode_pose(T)] * 2)[1], T)
    assert st._encode_poses([T, T]) == [st.encode_pose(T)] * 2


def test_malformed_pose_text():
    with pytest.raises(st.StoreError):
        st.decode_pose("1 2 3")


# ----------------------------------------------------------------- save and load


def test_round_trip_bitwise(saved, cube_pipeline):
    store, ids = saved
    pl = cube_pipeline
    oid = ids.object
    free = st.load_freeairgrips(store, oid)
    assert len(free) == len(pl.grasps)
    for k, g in enumerate(pl.grasps):
        assert free.ids[k] == ids.freeairgrip[g.id]
        assert np.array_equal(free.poses[k], g.hand_pose)
        assert np.array_equal(free.contact_points[k], [g.pair.p0, g.pair.p1])
        assert np.array_equal(free.contact_normals[k], [g.pair.n0, g.pair.n1])
        assert free.jaw_widths[k] == g.jaw_width
    pids, rotmats = st.load_placements(store, oid)
    for k, p in enumerate(pl.placements):
        assert np.array_equal(rotmats[k], p.rotmat)
    ftg = st.load_freetabletopgrips(store, oid)
    flat = [g for p in pl.placements for g in pl.placement_grips[p.id]]
    assert len(ftg) == len(flat)
    for k, g in enumerate(flat):
        assert np.array_equal(ftg.poses[k], g.hand_pose)
        assert ftg.placement_ids[k] == ids.freetabletopplacement[g.placement_id]
    inst = st.load_tabletopplacements(store, oid)
    for k, t in enumerate(pl.instances):
        assert np.array_equal(inst.poses[k], t.world_pose)
        assert np.array_equal(inst.positions[k], t.position)
        assert inst.angles[k] == pl.angles[t.angle_id]
    ttg = st.load_tabletopgrips(store, oid)
    for k, g in enumerate(pl.grips):
        assert np.array_equal(ttg.poses[k], g.hand_pose)
        assert np.array_equal(ttg.contact_points[k], g.contact_points)
        assert np.array_equal(ttg.contact_normals[k], g.contact_normals)
        assert ttg.grasp_ids[k] == ids.freeairgrip[g.freeairgrip_id]
    flags = _flags(pl.grips)
    for r, name in enumerate(("arm6", "arm7")):
        rid = st.robot_id(store, name)
        got = st.load_ik(store, oid, rid)
        want = {
            ids.tabletopgrips[f.tabletopgrip_id]: (f.feasibility, f.feasibility_handx, f.feasibility_handxworldz)
            for f in flags
            if f.robot_id == r
        }
        assert got == want
        feas = st.feasible_grip_ids(store, oid, rid)
        assert feas.tolist() == sorted(k for k, v in want.items() if all(v))
    assert st.load_ikret(store) == [(ids.ikret, 0.05, 0.05)]
    assert sorted(st.load_angles(store).values()) == sorted(pl.angles)


def test_cardinality_and_audit(saved, cube_pipeline):
    store, _ = saved
    pl = cube_pipeline
    report = st.audit(store)
    assert report.ok, report.problems
    c = report.counts
    assert c["tabletopplacements"] == len(pl.placements) * len(pl.grid) * len(pl.angles)
    per_placement = sum(len(v) for v in pl.placement_grips.values())
    assert c["tabletopgrips"] == len(pl.grid) * len(pl.angles) * per_placement
    assert c["ik"] == 2 * c["tabletopgrips"]
    assert c["object"] == 1 and c["robot"] == 2 and c["angle"] == 2


def test_resave_replaces_rows(saved, cube_pipeline):
    store, first = saved
    before = store.counts()
    second = _save(store, cube_pipeline)
    assert store.counts() == before
    # the old rows are gone before ids are drawn, so a lone object keeps its ids
    assert second == first
    assert st.object_names(store) == ["cube"]
    assert st.audit(store).ok


def test_two_objects_share_angles_and_robots(saved, cube_pipeline):
    store, _ = saved
    _save(store, cube_pipeline, name="cube2")
    c = store.counts()
    assert c["angle"] == 2 and c["robot"] == 2 and c["object"] == 2
    assert st.audit(store).ok
    a = st.load_tabletopgrips(store, st.object_id(store, "cube"))
    b = st.load_tabletopgrips(store, st.object_id(store, "cube2"))
    assert len(a) == len(b) and not set(a.ids) & set(b.ids)


def test_dangling_reference_rolls_back(saved, cube_pipeline):
    store, _ = saved
    before = store.counts()
    bad = [IkFeasibility(5, cube_pipeline.grips[0].id, True, True, True)]
    with pytest.raises(st.ReferentialIntegrityError):
        _save(store, cube_pipeline, name="other", ik=bad)
    assert store.counts() == before
    assert st.object_names(store) == ["cube"]


def test_failure_midway_rolls_back(tmp_path, cube_pipeline):
    store = st.init_store(tmp_path / "r.db")

    class Boom:
        id = 0

        @property
        def placement_id(self):
            raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        _save(store, cube_pipeline, instances=[Boom()])
    assert all(n == 0 for n in store.counts().values())
    store.close()


def test_unknown_object(saved):
    store, _ = saved
    with pytest.raises(st.UnknownObjectError):
        st.object_id(store, "teapot")
    with pytest.raises(KeyError):
        st.load_tabletopgrips(store, 999)
    with pytest.raises(st.StoreError):
        st.robot_id(store, "nobody")


# ----------------------------------------------------------------- joins


def _grip_dicts(store, oid):
    rows = store.execute(
        "SELECT g.id, g.idfreeairgrip, g.idtabletopplacements FROM tabletopgrips g"
        " JOIN freeairgrip f ON g.idfreeairgrip = f.idfreeairgrip WHERE f.idobject = ?",
        (oid,),
    ).fetchall()
    return [{"id": r[0], "grasp": r[1], "inst": r[2]} for r in rows]


def test_joins_match_nested_loops(tmp_path, cube_pipeline):
    # a small slice keeps the O(n^2) scan quick
    pl = cube_pipeline
    keep_inst = {t.id for t in pl.instances[:6]}
    grips = [g for g in pl.grips if g.tabletopplacement_id in keep_inst][::3]
    with st.init_store(tmp_path / "j.db") as store:
        ids = _save(
            store, pl, instances=pl.instances[:6], grips=grips, ik=_flags(grips)
        )
        rows = _grip_dicts(store, ids.object)
        assert 20 < len(rows) < 400
        shared = nested_loop_pairs(rows, lambda a, b: a["grasp"] == b["grasp"] and a["inst"] != b["inst"])
        coplaced = nested_loop_pairs(rows, lambda a, b: a["inst"] == b["inst"])
        assert st.query_shared_grasps(store, ids.object) == shared
        assert st.query_coplaced_grips(store, ids.object) == coplaced
        for key, pairs in (("freeairgrip", shared), ("placement", coplaced)):
            groups = st.grip_groups(store, ids.object, key)
            from_groups = set()
            for members in groups.values():
                for i, a in enumerate(members):
                    for b in members[i + 1:]:
                        from_groups.add((a, b))
            if key == "freeairgrip":
                inst = {r["id"]: r["inst"] for r in rows}
                from_groups = {p for p in from_groups if inst[p[0]] != inst[p[1]]}
            assert sorted(from_groups) == pairs


# ----------------------------------------------------------------- csv


def test_csv_export_is_deterministic(saved, tmp_path):
    store, _ = saved
    a = st.export_csv(store, tmp_path / "a")
    b = st.export_csv(store, tmp_path / "b")
    assert [p.name for p in a] == [f"{t}.csv" for t in st.TABLES]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    lines = (tmp_path / "a" / "angle.csv").read_text().splitlines()
    assert lines[0] == "idangle,value"
    assert float(lines[2].split(",")[1]) == np.pi / 2


def test_audit_flags_corruption(saved):
    store, _ = saved
    store.execute("PRAGMA foreign_keys = OFF")
    store.execute("DELETE FROM tabletopplacements WHERE id = (SELECT MIN(id) FROM tabletopplacements)")
    store.execute("PRAGMA foreign_keys = ON")
    report = st.audit(store)
    assert not report.ok
    assert any("missing tabletopplacements" in p for p in report.problems)
    assert any("tabletop placements !=" in p for p in report.problems)
