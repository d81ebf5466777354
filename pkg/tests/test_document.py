import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import check_sharding, chunk_by_scan, key_bytes
from polygate.engines import Chunk, Document, EngineError, OversizedDocument, ShardedCluster, UnknownTable
from polygate.engines.base import encode_key
from polygate.engines.document import body_size, matches_filter
from polygate.engines.shell import parse_call


def doc(key, pad=0):
    return Document(key, {"_id": key, "pad": "x" * pad})


def two_chunk_cluster():
    cl = ShardedCluster(shards=["s1", "s2"])
    coll = cl.create_collection("c", sharded=True, shard_key="_id")
    boundary = encode_key(100)
    coll.chunks[:] = [Chunk(b"", boundary, "s1"), Chunk(boundary, None, "s2")]
    return cl


class TestRouting:
    def test_boundary_goes_to_upper_chunk(self):
        cl = two_chunk_cluster()
        assert cl.route_key("c", 100).shard == "s2"
        assert cl.route_key("c", 99).shard == "s1"
        assert cl.route_key("c", -5).shard == "s1"

    def test_single_chunk_takes_everything(self):
        cl = ShardedCluster()
        cl.create_collection("c", sharded=True)
        chunk = cl.collections["c"].chunks[0]
        for k in (-(2**63), 0, 2**63 - 1, "abc", ""):
            assert cl.route_key("c", k).chunk is chunk

    def test_unsharded_routes_to_primary(self):
        cl = ShardedCluster(shards=["a", "b"], primary_shard="b")
        cl.create_collection("plain")
        r = cl.route_key("plain", 5)
        assert r.to_primary and r.shard == "b"

    def test_unknown_collection(self):
        with pytest.raises(UnknownTable):
            ShardedCluster().route_key("nope", 1)

    def test_random_keys_agree_with_scan(self):
        rng = random.Random(7)
        cl = ShardedCluster(chunk_size=400)
        cl.create_collection("c", sharded=True)
        for k in rng.sample(range(10_000), 300):
            cl.insert_document("c", doc(k, 20))
        chunks = cl.collections["c"].chunks
        assert len(chunks) >= 3
        routed = {}
        for k in [rng.randrange(-(10**6), 10**6) for _ in range(1000)]:
            r = cl.route_key("c", k)
            assert r.chunk is chunk_by_scan(chunks, key_bytes(k))
            routed.setdefault(id(r.chunk), set()).add(k)
        assert sum(len(v) for v in routed.values()) == len(set().union(*routed.values()))

    def test_integer_encoding_preserves_order(self):
        keys = [-(2**63), -1000, -1, 0, 1, 255, 256, 2**63 - 1]
        encs = [encode_key(k) for k in keys]
        assert encs == sorted(encs)


class TestInsertAndSplit:
    def test_split_after_exceeding_chunk_size(self):
        sizes = [body_size({"_id": k, "pad": "x" * 50}) for k in range(5)]
        cl = ShardedCluster(chunk_size=sum(sizes[:3]))
        cl.create_collection("c", sharded=True)
        reports = [cl.insert_document("c", doc(k, 50)) for k in range(4)]
        assert reports[-1].splits and not any(r.splits for r in reports[:-1])
        check_sharding(cl, "c", expected_docs=4, expected_bytes=sum(sizes[:4]))
        assert len(cl.collections["c"].chunks) == 2

    def test_median_split_and_least_loaded_placement(self):
        cl = ShardedCluster(shards=["s0", "s1", "s2"], chunk_size=100)
        cl.create_collection("c", sharded=True)
        for k in range(4):
            cl.insert_document("c", Document(k, {"_id": k}, byte_size=30))
        lo, hi = cl.collections["c"].chunks
        # four keys, median index 2 -> split key 2
        assert hi.low == encode_key(2)
        assert lo.owner == "s0" and hi.owner == "s1"

    def test_placement_ties_to_lowest_index(self):
        cl = ShardedCluster(shards=["s0", "s1", "s2"], chunk_size=50)
        cl.create_collection("c", sharded=True)
        owners = []
        for k in range(12):
            r = cl.insert_document("c", Document(k, {"_id": k}, byte_size=20))
            owners += [s.upper_owner for s in r.splits]
        assert owners[0] == "s1"
        assert set(owners) <= {"s0", "s1", "s2"}
        check_sharding(cl, "c", expected_docs=12)

    def test_single_key_chunk_may_exceed(self):
        cl = ShardedCluster(chunk_size=50)
        cl.create_collection("c", sharded=True)
        for _ in range(10):
            cl.insert_document("c", Document(7, {"_id": 7}, byte_size=20))
        check_sharding(cl, "c", expected_docs=10)
        assert len(cl.collections["c"].chunks) == 1

    def test_unsharded_lives_on_primary(self):
        cl = ShardedCluster(shards=["a", "b", "c"], primary_shard="c")
        r = cl.insert_document("people", doc(1))
        assert r.shard == "c"
        assert cl.shard_bytes() == {"a": 0, "b": 0, "c": doc(1).byte_size}

    def test_oversized_rejected(self):
        cl = ShardedCluster()
        with pytest.raises(OversizedDocument):
            cl.insert_document("c", Document(1, {"_id": 1}, byte_size=16777217))
        cl.insert_document("c", Document(2, {"_id": 2}, byte_size=16777216))

    def test_key_conflict_rejected(self):
        cl = ShardedCluster()
        cl.create_collection("c", sharded=True)
        with pytest.raises(EngineError):
            cl.insert_document("c", Document(1, {"_id": 2}))

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=200), st.integers(40, 400))
    @settings(max_examples=50, deadline=None)
    def test_invariants_under_random_inserts(self, keys, chunk_size):
        cl = ShardedCluster(chunk_size=chunk_size)
        cl.create_collection("c", sharded=True)
        total = 0
        for i, k in enumerate(keys):
            d = Document(k, {"_id": k, "i": i})
            total += d.byte_size
            cl.insert_document("c", d)
        check_sharding(cl, "c", expected_docs=len(keys), expected_bytes=total)
        assert sum(cl.shard_bytes().values()) == total


class TestQueries:
    @pytest.fixture
    def cluster(self):
        cl = ShardedCluster(chunk_size=200)
        cl.create_collection("People", sharded=True, shard_key="_id")
        for k in range(20):
            cl.insert_document("People", Document(k, {"_id": k, "age": k * 5, "branch": "main" if k % 2 else "x"}))
        return cl

    def test_targeted_find_reads_one_key(self, cluster):
        res = cluster.find("People", {"_id": 4})
        assert [r["_id"] for r in res.rows] == [4]
        assert res.rows_read == 1

    def test_filter_operators(self, cluster):
        res = cluster.find("People", {"age": {"$gt": 80}})
        assert sorted(r["_id"] for r in res.rows) == [17, 18, 19]
        res = cluster.find("People", {"$or": [{"_id": 1}, {"_id": {"$in": [2, 3]}}]})
        assert sorted(r["_id"] for r in res.rows) == [1, 2, 3]

    def test_update_multi_and_delete(self, cluster):
        res = cluster.update("People", {"age": {"$gt": 2}}, {"$set": {"branch": "main"}}, multi=True)
        assert res.affected == 19
        assert all(r["branch"] == "main" for r in cluster.find("People", {"_id": {"$gte": 1}}).rows)
        gone = cluster.delete("People", {"branch": "x"})
        assert gone.affected == 1
        check_sharding(cluster, "People", expected_docs=19)

    def test_shard_key_immutable(self, cluster):
        with pytest.raises(EngineError):
            cluster.update("People", {"_id": 1}, {"$set": {"_id": 99}})

    def test_matches_filter_basics(self):
        body = {"a": 1, "b": "x"}
        assert matches_filter(body, {"a": {"$lte": 1}, "b": "x"})
        assert not matches_filter(body, {"a": {"$ne": 1}})
        assert matches_filter(body, {"c": {"$nin": [1]}})


class TestShell:
    def test_parse_call(self):
        assert parse_call("db. People. Find ();") == ("People", "find", [])
        coll, method, args = parse_call("db. People. Update ({custage: {$gt: 2}}, {$set: {branch: 'main'}}, {multi: true})")
        assert (coll, method) == ("People", "update")
        assert args == [{"custage": {"$gt": 2}}, {"$set": {"branch": "main"}}, {"multi": True}]

    def test_shell_round_trip(self):
        cl = ShardedCluster()
        cl.execute("db. People. Insert ({cust_id: 'appl01', branch: 'main', status: 'A', custage: 5})")
        cl.execute("db.People.insertMany([{custage: 1}, {custage: 9}])")
        assert len(cl.execute("db. People. Find ();").rows) == 3
        res = cl.execute("db. People. Update ({custage: {$gt: 2}}, {$set: {branch: 'main'}}, {multi: true})")
        assert res.affected == 2
        assert cl.execute("db. People. deletemany({custage: 1});").affected == 1
        assert cl.execute("db. People.remove();").affected == 2
        assert cl.execute("db.People.find()").rows == []

    def test_auto_ids_are_sequential(self):
        cl = ShardedCluster()
        cl.execute("db.t.insert({a: 1})")
        cl.execute("db.t.insert({a: 2})")
        assert sorted(r["_id"] for r in cl.execute("db.t.find()").rows) == [1, 2]


class TestDumpLoad:
    def test_byte_exact_round_trip(self):
        cl = ShardedCluster(shards=["a", "b"], chunk_size=300)
        cl.create_collection("c", sharded=True, shard_key="k")
        rng = random.Random(3)
        for i in range(60):
            k = rng.choice([rng.randrange(1000), f"s{rng.randrange(50)}"])
            cl.insert_document("c", Document(k, {"k": k, "v": i, "nested": {"x": [1, 2]}}))
        text = cl.dump("c")
        first = text.splitlines()[0]
        assert '"header"' in first
        again = ShardedCluster.load(text)
        assert again.dump("c") == text
        check_sharding(again, "c", expected_docs=60)

    def test_unsharded_round_trip(self):
        cl = ShardedCluster(shards=["a", "b"], primary_shard="b")
        for i in range(5):
            cl.insert_document("u", doc(i))
        text = cl.dump("u")
        assert ShardedCluster.load(text).dump("u") == text
