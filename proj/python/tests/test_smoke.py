import math

import pytest

import cakd


def test_softmax_normalizes():
    p = cakd.softmax([1.0, 2.0, 3.0], 2.0)
    assert math.isclose(sum(p), 1.0, rel_tol=1e-12)
    assert p[0] < p[1] < p[2]


def test_worked_example():
    ft = [math.log(0.5), math.log(0.3), math.log(0.2)]
    fs = [math.log(0.4), math.log(0.4), math.log(0.2)]
    cfg = cakd.LossConfig()
    cfg.temperature = 1.0
    d = cakd.decouple_single_label(ft, fs, 0, cfg)
    assert d.bcd == pytest.approx(0.020411, abs=1e-5)
    assert d.wcd == pytest.approx(0.009712, abs=1e-5)
    assert d.plain_kl == pytest.approx(0.025268, abs=1e-5)
    assert d.scd == 0.0


def test_decoupling_identity():
    ft = [0.3, -1.2, 2.0, 0.7, -0.4]
    fs = [1.1, 0.2, -0.5, 0.9, 0.0]
    cfg = cakd.LossConfig()
    cfg.temperature = 4.0
    part = cakd.partition_topk(ft, 2)
    d = cakd.decouple(ft, fs, part, cfg)
    recon = d.bcd + d.p_s_teacher * d.scd + d.p_w_teacher * d.wcd
    assert d.plain_kl == pytest.approx(recon, rel=1e-12)


def test_recovery_matches_plain_kl():
    ft = [0.5, -0.3, 1.4, -2.0]
    fs = [0.1, 0.1, 0.2, -0.2]
    cfg = cakd.LossConfig()
    cfg.recover_plain_kd = True
    part = cakd.partition_topk(ft, 2)
    d = cakd.decouple(ft, fs, part, cfg)
    assert d.weighted_total == pytest.approx(d.plain_kl, abs=1e-12)
    g = cakd.grad_student(ft, fs, part, cfg)
    p = cakd.softmax(ft, cfg.temperature)
    q = cakd.softmax(fs, cfg.temperature)
    for gj, pj, qj in zip(g, p, q):
        assert gj == pytest.approx((qj - pj) / cfg.temperature, abs=1e-12)


def test_partition_errors():
    with pytest.raises(Exception):
        cakd.partition_topk([1.0, 2.0, 3.0], 3)


def test_generate_blobs():
    inputs, labels = cakd.generate_blobs(7, 4, 5, 8, 0.3)
    assert len(inputs) == 20
    assert len(labels) == 20
    assert sorted(set(labels)) == [0, 1, 2, 3]
    assert len(inputs[0]) == 8
