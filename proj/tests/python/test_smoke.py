# Copyright 2026 The DiffSketch Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import math
import random

import pytest

import diffsketch as ds


def gaussian(n, seed):
    rng = random.Random(seed)
    return [rng.gauss(0.0, 1.0) for _ in range(n)]


def test_dims_for_error():
    assert ds.dims_for_error(0.25, 0.01) == (5, 44)


def test_bad_dims_raise():
    with pytest.raises(ds.DiffSketchError):
        ds.SketchDims(0, 4, 10)
    # also a ValueError for generic callers
    with pytest.raises(ValueError):
        ds.SketchDims(3, 4, 0)


def test_merge_is_linear():
    dims = ds.SketchDims(5, 50, 1000)
    a, b = gaussian(1000, 1), gaussian(1000, 2)
    sa, sb, ssum = (ds.CountSketch(dims, 9) for _ in range(3))
    sa.encode(a)
    sb.encode(b)
    ssum.encode([x + y for x, y in zip(a, b)])
    merged = sa.merge(sb).counters()
    for m, s in zip(merged, ssum.counters()):
        assert m == pytest.approx(s, rel=1e-12, abs=1e-12)


def test_one_sparse_query_is_exact():
    # a lone nonzero never shares a bucket with another nonzero
    dims = ds.SketchDims(3, 16, 64)
    g = [0.0] * 64
    g[17] = 2.5
    sk = ds.CountSketch(dims, 4)
    sk.encode(g)
    assert sk.query(17) == 2.5


def test_bytes_round_trip_and_corruption():
    sk = ds.CountSketch(ds.SketchDims(3, 8, 40), 77)
    sk.encode(gaussian(40, 3))
    raw = sk.to_bytes()
    assert ds.CountSketch.from_bytes(raw) == sk
    assert raw[:4] == b"DSK1"
    with pytest.raises(ds.DiffSketchError, match="bad-magic"):
        ds.CountSketch.from_bytes(b"XSK1" + raw[4:])
    with pytest.raises(ds.DiffSketchError, match="truncated"):
        ds.CountSketch.from_bytes(raw[:-1])


def test_sketch_epsilon():
    eps = ds.sketch_epsilon(1.0, 1.0, 100000, 7, 22)
    x = 22 * 21 * (1 + math.log(100000 - 22)) / (100000 - 2)
    assert eps == pytest.approx(-7 * math.log(1 - 2 * x), rel=1e-12)
    assert ds.sketch_epsilon(1.0, 1.0, 100, 1, 22) is None


def test_estimate_stats():
    alpha, sigma2 = ds.estimate_stats([1.0, -2.0, 3.0, -4.0], 1.0)
    assert alpha == 4.0
    assert sigma2 > 0


def test_cli_privacy_sweep():
    code, out, err = ds.run_cli(["privacy-sweep", "--no-timestamp"])
    assert code == 0, err
    records = [json.loads(line) for line in out.splitlines()]
    assert records[-1]["type"] == "summary"
    assert records[-1]["monotone_violations"] == 0


def test_cli_usage_error():
    code, _, err = ds.run_cli(["train", "--rounds", "abc"])
    assert code == 2
    assert err
