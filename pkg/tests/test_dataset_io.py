import hashlib
import json

import numpy as np
import pytest

from pdtune import dataset_io as dio
from pdtune.control import Gains
from pdtune.dataset_io import (IntegrityError, MalformedDatasetError, manifest_for,
                               read_front, read_rollout, write_front, write_rollout,
                               write_trajectory_csv)
from pdtune.pareto import extract_front
from pdtune.plant import ArmModel, CartesianPoint
from pdtune.rollout import ObjectiveVector, accuracy_objective, simulate, torque_objective
from pdtune.trajectory import Workspace, gen_spiral, to_joint_setpoints


@pytest.fixture(scope="module")
def rollout_case():
    model = ArmModel(n_links=2, link_lengths=(1.0, 0.8), link_masses=(2.0, 1.5),
                     viscous_damping=(0.1, 0.1), torque_limits=(50.0, 50.0))
    ws = Workspace.from_model(model)
    traj = gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, 0.5, 0.002, ws)
    jtraj = to_joint_setpoints(model, traj)
    log = simulate(model, jtraj, Gains(kp=(150.0, 120.0), kd=(12.0, 9.0)))
    obj = ObjectiveVector(accuracy_objective(log), torque_objective(log))
    return model, traj, log, obj


def write_case(rollout_case, path):
    model, traj, log, obj = rollout_case
    manifest = manifest_for(model, log, objectives=obj, trajectory_params=traj.params)
    write_rollout(log, manifest, path)
    return manifest


class TestRolloutRoundTrip:
    def test_field_for_field_identity(self, rollout_case, tmp_path):
        model, traj, log, obj = rollout_case
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        back, manifest = read_rollout(path)
        for name in ("t", "q", "qd", "u", "ee", "des"):
            assert np.array_equal(getattr(back, name), getattr(log, name)), name
        assert back.dt == log.dt
        assert back.meta.gains == log.meta.gains
        assert back.meta.trajectory_kind == log.meta.trajectory_kind
        assert manifest.f_acc == obj.f_acc and manifest.f_t == obj.f_t
        assert manifest.model["hash"] == model.content_hash()

    def test_column_formula(self, rollout_case, tmp_path):
        # t + n*q + n*qd + n*u + ee(2) + des(2) => 1 + 3n + 4 = 11 for n=2
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        header = path.read_text().splitlines()[0].split(",")
        assert len(header) == 11
        n = rollout_case[0].n_links
        assert len(header) == 1 + 3 * n + 4

    def test_byte_identical_rewrites(self, rollout_case, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_case(rollout_case, a)
        write_case(rollout_case, b)
        assert a.read_bytes() == b.read_bytes()
        ma = json.loads(dio.manifest_path(a).read_text())
        mb = json.loads(dio.manifest_path(b).read_text())
        ma.pop("csv_file"), mb.pop("csv_file")
        assert ma == mb

    def test_refuses_overwrite_without_flag(self, rollout_case, tmp_path):
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        with pytest.raises(FileExistsError):
            write_case(rollout_case, path)
        model, traj, log, obj = rollout_case
        manifest = manifest_for(model, log, objectives=obj)
        write_rollout(log, manifest, path, overwrite=True)

    def test_no_temp_files_left(self, rollout_case, tmp_path):
        write_case(rollout_case, tmp_path / "roll.csv")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["roll.csv", "roll.csv.json"]


class TestRolloutIntegrity:
    def test_truncated_file_fails_checksum(self, rollout_case, tmp_path):
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(IntegrityError):
            read_rollout(path)

    def test_bit_flip_fails_checksum(self, rollout_case, tmp_path):
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        data = bytearray(path.read_bytes())
        data[100] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(IntegrityError):
            read_rollout(path)

    def test_malformed_row_names_line(self, rollout_case, tmp_path):
        # keep the checksum honest so the structural check is what trips
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        lines = path.read_text().splitlines(keepends=True)
        lines[5] = lines[5].replace(",", ";", 1)
        broken = "".join(lines)
        path.write_text(broken)
        mpath = dio.manifest_path(path)
        meta = json.loads(mpath.read_text())
        meta["sha256"] = hashlib.sha256(broken.encode()).hexdigest()
        mpath.write_text(json.dumps(meta))
        with pytest.raises(MalformedDatasetError) as err:
            read_rollout(path)
        assert err.value.line == 6

    def test_truncation_with_fixed_checksum_names_last_good_line(self, rollout_case, tmp_path):
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        lines = path.read_text().splitlines(keepends=True)
        truncated = "".join(lines[:9]) + lines[9].rsplit(",", 2)[0]
        path.write_text(truncated)
        mpath = dio.manifest_path(path)
        meta = json.loads(mpath.read_text())
        meta["sha256"] = hashlib.sha256(truncated.encode()).hexdigest()
        mpath.write_text(json.dumps(meta))
        with pytest.raises(MalformedDatasetError, match="last good line 9"):
            read_rollout(path)

    def test_non_numeric_cell(self, rollout_case, tmp_path):
        path = tmp_path / "roll.csv"
        write_case(rollout_case, path)
        text = path.read_text().splitlines()
        cells = text[3].split(",")
        cells[2] = "oops"
        text[3] = ",".join(cells)
        broken = "\n".join(text) + "\n"
        path.write_text(broken)
        mpath = dio.manifest_path(path)
        meta = json.loads(mpath.read_text())
        meta["sha256"] = hashlib.sha256(broken.encode()).hexdigest()
        mpath.write_text(json.dumps(meta))
        with pytest.raises(MalformedDatasetError) as err:
            read_rollout(path)
        assert err.value.line == 4


class TestFrontFiles:
    def front(self):
        pts = [(0.5, 3.0), (1.0, 1.0), (2.0, 0.25)]
        gains = [Gains(kp=(10.0, 20.0), kd=(0.5, 0.25)),
                 Gains(kp=(100.0, 200.0), kd=(5.0, 2.5)),
                 Gains(kp=(1.0, 2.0), kd=(0.05, 0.025))]
        return extract_front(pts, genomes=gains), gains

    def test_round_trip(self, tmp_path):
        front, _ = self.front()
        path = tmp_path / "front.csv"
        write_front(front, list(front.genomes), path)
        points, gains = read_front(path)
        assert points == list(front.points)
        assert gains == list(front.genomes)

    def test_sorted_by_accuracy(self, tmp_path):
        front, _ = self.front()
        path = tmp_path / "front.csv"
        write_front(front, list(front.genomes), path)
        points, _ = read_front(path)
        assert points == sorted(points)

    def test_empty_front_header_only(self, tmp_path):
        path = tmp_path / "front.csv"
        write_front(extract_front([]), [], path, n_joints=2)
        lines = path.read_text().splitlines()
        assert lines == ["f_acc,f_t,kp_1,kp_2,kd_1,kd_2"]
        points, gains = read_front(path)
        assert points == [] and gains == []

    def test_empty_front_needs_joint_count(self, tmp_path):
        with pytest.raises(ValueError):
            write_front(extract_front([]), [], tmp_path / "front.csv")


class TestTrajectoryExport:
    def test_rows_match_points(self, tmp_path):
        model = ArmModel(n_links=2, link_lengths=(1.0, 0.8), link_masses=(2.0, 1.5),
                         viscous_damping=(0.1, 0.1), torque_limits=(50.0, 50.0))
        traj = gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, 0.1, 0.002,
                          Workspace.from_model(model))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,y"
        assert len(lines) == traj.ticks + 1
        first = [float(v) for v in lines[1].split(",")]
        assert first == [0.0, traj.points[0, 0], traj.points[0, 1]]
