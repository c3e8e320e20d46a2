from mcpvet.llm import MockBackend
from mcpvet.queries import generate_queries


def _mock(queries):
    mock = MockBackend()
    mock.add_rule({"queries": queries}, purpose="query_gen")
    return mock


def test_exact_count_and_distinct():
    mock = _mock([
        "Book a flight from Oslo to Rome for Friday",
        "I need plane tickets Oslo->Rome, can you arrange?",
        "Use the book_flight tool to get me to Rome from Oslo",
    ])
    qs = generate_queries("book_flight", "books a flight between two cities", 3, mock)
    assert len(qs.queries) == 3
    assert len(set(qs.queries)) == 3
    assert any("book_flight" in q for q in qs.queries)


def test_single_query():
    qs = generate_queries("echo", "echoes text", 1, _mock(["Echo hi please"]))
    assert qs.queries == ["Echo hi please"]


def test_underdelivery_triggers_retry_then_padding():
    mock = MockBackend()
    # Both rounds return the same two queries; padding fills the gap.
    mock.add_rule({"queries": ["q one", "q two"]}, purpose="query_gen")
    qs = generate_queries("t", "does things", 3, mock)
    assert len(qs.queries) == 3
    assert len(set(qs.queries)) == 3
    assert qs.queries[2].startswith("q one (variant")


def test_overdelivery_truncated():
    qs = generate_queries("t", "does things", 2,
                          _mock(["a", "b", "c", "d"]))
    assert len(qs.queries) == 2


def test_duplicates_deduplicated():
    mock = MockBackend()
    mock.add_rule({"queries": ["same", "same", "same"]}, purpose="query_gen")
    qs = generate_queries("t", "does things", 3, mock)
    assert len(set(qs.queries)) == 3


def test_pure_function_of_inputs_with_mock():
    queries = ["one", "two", "three"]
    a = generate_queries("t", "intent", 3, _mock(queries))
    b = generate_queries("t", "intent", 3, _mock(queries))
    assert a.queries == b.queries


def test_invalid_inputs():
    import pytest
    with pytest.raises(ValueError):
        generate_queries("t", "", 3, _mock(["x"]))
    with pytest.raises(ValueError):
        generate_queries("t", "intent", 0, _mock(["x"]))
