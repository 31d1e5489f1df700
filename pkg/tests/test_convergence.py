import csv
import math

import numpy as np
import pytest

from pivotlab.convergence import (StudyConfig, StudyReport, StudyRow, eoc_reference, eoc_self,
                                  l1_error, project_fine_to_coarse, run_consistency, run_study,
                                  worker_count)
from pivotlab.errors import InvalidArgument, UndefinedRelativeError
from pivotlab.fixed_pivot import StateVector
from pivotlab.grid import MeshFamily, build_geometric, build_uniform, refine_random
from pivotlab.initial_condition import parse_density
from pivotlab.kernel import KernelSpec

NIC = parse_density("normal:1,0.01")
EIC = parse_density("exponential:10")
SUM = KernelSpec("sum", 1.0)


def test_projection_identity_and_additivity():
    g = build_uniform(0, 1, 2)
    s = StateVector([0.3, 0.7], 0.1, 0.2)
    assert np.array_equal(project_fine_to_coarse(s, g, g).N, s.N)
    coarse = build_uniform(0, 1, 1)
    assert project_fine_to_coarse(s, g, coarse).N[0] == pytest.approx(1.0)


def test_projection_conserves_moments(rng):
    base = build_geometric(1e-6, 1000, 30)
    coarse, fine = refine_random(base, 1, 3), refine_random(base, 2, 3)
    s = StateVector(rng.random(fine.n_cells))
    p = project_fine_to_coarse(s, fine, coarse)
    assert p.N.sum() == pytest.approx(s.N.sum(), rel=1e-14)
    with pytest.raises(InvalidArgument):
        project_fine_to_coarse(s, fine, build_uniform(0, 1000, 30))


def test_l1_error():
    a = StateVector([1.0, 0.0])
    assert l1_error(a, a) == 0
    assert l1_error(a, StateVector([0.0, 1.0])) == 2.0
    assert l1_error(a, StateVector([0.0, 1.0]), relative=True) == 2.0
    with pytest.raises(UndefinedRelativeError):
        l1_error([0.0, 0.0], [1.0, 0.0], relative=True)
    with pytest.raises(InvalidArgument):
        l1_error([1.0], [1.0, 2.0])


def test_eoc_values():
    assert eoc_self(0.0598, 0.0178) == pytest.approx(1.748, abs=1e-3)
    assert eoc_self(0.3, 0.3) == 0
    assert eoc_self(4.0, 1.0) == 2.0
    assert eoc_reference(0.0486, 0.0135) == pytest.approx(1.848, abs=1e-3)
    assert eoc_reference(7.0, 7.0) == 0
    assert eoc_reference(4e-3, 1e-3) == pytest.approx(2.0)
    with pytest.raises(InvalidArgument):
        eoc_self(0.0, 1.0)


@pytest.mark.parametrize("c", [1e-9, 0.37, 1e6])
def test_eoc_scale_invariant(c):
    assert eoc_self(c * 0.0598, c * 0.0178) == pytest.approx(eoc_self(0.0598, 0.0178), rel=1e-12)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        StudyConfig("oscillatory", 0, 15, SUM, NIC, gp0=45)
    with pytest.raises(InvalidArgument):
        StudyConfig("uniform", 0, 15, SUM, NIC, mode="richardson")
    with pytest.raises(InvalidArgument):
        StudyConfig("random", 1e-6, 1000, SUM, NIC, seeds=())
    with pytest.raises(InvalidArgument):
        run_study(StudyConfig("uniform", 0, 15, SUM, NIC, levels=1))
    cfg = StudyConfig("locally_uniform", 1e-6, 1000, SUM, NIC)
    assert cfg.base_family is MeshFamily.GEOMETRIC and cfg.gp_list == [60, 120, 240, 480]
    assert cfg.grid_at(120).n_cells == 120
    assert StudyConfig("uniform", 0, 30, SUM, EIC, mode="reference").relative is True


def test_single_level_reference():
    cfg = StudyConfig("uniform", 0, 30, SUM, EIC, gp0=30, levels=0, mode="reference", t_end=0.1)
    rep = run_study(cfg)
    assert len(rep.rows) == 1 and rep.rows[0].error > 0 and rep.rows[0].eoc is None


def test_small_self_study(tmp_path):
    cfg = StudyConfig("uniform", 0, 15, SUM, NIC, gp0=30, levels=2, t_end=0.1)
    rep = run_study(cfg)
    assert [r.gp for r in rep.rows] == [30, 60, 120]
    assert rep.rows[0].error is None and rep.rows[1].eoc is None
    assert rep.final_eoc is not None and math.isfinite(rep.final_eoc)
    path = tmp_path / "r.csv"
    rep.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["GP", "error", "EOC"]
    assert rows[1] == ["30", "", ""]
    assert float(rows[3][2]) == rep.final_eoc
    rep.to_json(tmp_path / "r.json")
    assert rep.metadata["fingerprint"] == cfg.fingerprint()


def test_random_study_averages_seeds():
    cfg = StudyConfig("random", 1e-6, 1000, SUM, NIC, gp0=30, levels=2, seeds=(0, 1), t_end=0.1)
    rep = run_study(cfg)
    single = [run_study(StudyConfig("random", 1e-6, 1000, SUM, NIC, gp0=30, levels=2, seeds=(s,),
                                    t_end=0.1)) for s in (0, 1)]
    for l in (1, 2):
        assert rep.rows[l].error == pytest.approx(np.mean([r.rows[l].error for r in single]), rel=1e-14)


def test_threads_do_not_change_results(monkeypatch):
    cfg = StudyConfig("random", 1e-6, 1000, SUM, NIC, gp0=30, levels=2, seeds=(0, 1, 2), t_end=0.05)
    monkeypatch.setenv("PIVOTLAB_THREADS", "1")
    a = run_study(cfg)
    monkeypatch.setenv("PIVOTLAB_THREADS", "3")
    b = run_study(cfg)
    assert a.errors() == b.errors()


def test_worker_count(monkeypatch):
    monkeypatch.setenv("PIVOTLAB_THREADS", "junk")
    assert worker_count() == 1
    monkeypatch.delenv("PIVOTLAB_THREADS")
    assert worker_count() == 1


def test_consistency_report(tmp_path):
    cfg = StudyConfig("uniform", 0, 15, SUM, NIC, gp0=60, levels=1)
    rep = run_consistency(cfg)
    assert rep.value_name == "sigma_l1" and rep.rows[0].eoc is None
    assert 2.8 <= rep.rows[1].eoc <= 5.5
    rep.to_csv(tmp_path / "c.csv")
    assert open(tmp_path / "c.csv").readline().strip() == "GP,sigma_l1,ratio"
    single = run_consistency(StudyConfig("uniform", 0, 15, SUM, NIC, gp0=60, levels=0))
    single.to_csv(tmp_path / "one.csv")
    lines = open(tmp_path / "one.csv").read().splitlines()
    assert lines[0] == "GP,sigma_l1" and len(lines) == 2


def test_failed_level_recorded():
    # absurd dt makes every level blow up; the report keeps diagnostic rows
    cfg = StudyConfig("uniform", 0, 15, KernelSpec("product", 1.0), NIC, gp0=30, levels=2,
                      t_end=1e4, dt=100.0)
    rep = run_study(cfg)
    assert all(r.status.startswith("failed") for r in rep.rows)
    assert rep.final_eoc is None


def test_format_table():
    rep = StudyReport([StudyRow(60), StudyRow(120, 0.05), StudyRow(240, 0.0125, 2.0)])
    text = rep.format_table()
    assert "2.000" in text and "1.2500e-02" in text
    assert text.splitlines()[1].split() == ["60", "-", "-"]
