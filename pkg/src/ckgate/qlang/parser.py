"""Recursive-descent parser.

Grammar:

    query    := "MATCH" pattern ["WHERE" cond {"AND" cond}]
                "RETURN" item {"," item} ["LIMIT" int]
    pattern  := nodeElem {edgeElem nodeElem}          (1-3 nodeElems)
    nodeElem := "(" var [":" Label] ")"
    edgeElem := "-[" [var] [":" EdgeType] "]->"
              | "<-[" [var] [":" EdgeType] "]-"
    cond     := var "." key op literal
    op       := "=" | "<>" | "<" | "<=" | ">" | ">=" | "CONTAINS"
    item     := var | var "." key
    literal  := quoted string | number
"""

from __future__ import annotations

from typing import Optional

from .ast import (
    FORWARD,
    MAX_PATTERN_NODES,
    REVERSE,
    Condition,
    EdgeElem,
    NodeElem,
    Query,
    ReturnItem,
    Token,
)
from .errors import ParseError, PatternTooLong, UnboundVariable
from .lexer import tokenize


class _Cursor:
    def __init__(self, tokens: list[Token], input_bytes: int):
        self.tokens = tokens
        self.pos = 0
        self.end = input_bytes

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def at_symbol(self, *symbols: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == "symbol" and token.lexeme in symbols

    def at_keyword(self, keyword: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == "keyword" and token.lexeme == keyword

    def expect_symbol(self, symbol: str) -> Token:
        token = self.peek()
        if token is None:
            raise ParseError(self.end, f"'{symbol}'", "end of input")
        if token.kind != "symbol" or token.lexeme != symbol:
            raise ParseError(token.position, f"'{symbol}'", repr(token.lexeme))
        return self.advance()

    def expect_keyword(self, keyword: str) -> Token:
        token = self.peek()
        if token is None:
            raise ParseError(self.end, keyword, "end of input")
        if token.kind != "keyword" or token.lexeme != keyword:
            raise ParseError(token.position, keyword, repr(token.lexeme))
        return self.advance()

    def expect_identifier(self, what: str) -> Token:
        token = self.peek()
        if token is None:
            raise ParseError(self.end, what, "end of input")
        if token.kind != "identifier":
            raise ParseError(token.position, what, repr(token.lexeme))
        return self.advance()


def parse(text: str) -> Query:
    cursor = _Cursor(tokenize(text), len(text.encode("utf-8")))
    cursor.expect_keyword("MATCH")
    nodes, edges = _parse_pattern(cursor)
    where: list[Condition] = []
    if cursor.at_keyword("WHERE"):
        cursor.advance()
        where.append(_parse_condition(cursor))
        while cursor.at_keyword("AND"):
            cursor.advance()
            where.append(_parse_condition(cursor))
    cursor.expect_keyword("RETURN")
    returns = [_parse_return_item(cursor)]
    while cursor.at_symbol(","):
        cursor.advance()
        returns.append(_parse_return_item(cursor))
    limit: Optional[int] = None
    if cursor.at_keyword("LIMIT"):
        cursor.advance()
        token = cursor.peek()
        if token is None:
            raise ParseError(cursor.end, "positive integer", "end of input")
        if token.kind != "number" or not isinstance(token.value, int) or token.value < 1:
            raise ParseError(token.position, "positive integer", repr(token.lexeme))
        cursor.advance()
        limit = token.value
    trailing = cursor.peek()
    if trailing is not None:
        raise ParseError(trailing.position, "end of input", repr(trailing.lexeme))

    query = Query(
        nodes=tuple(nodes),
        edges=tuple(edges),
        where=tuple(where),
        returns=tuple(returns),
        limit=limit,
    )
    bound = query.variables()
    for cond in query.where:
        if cond.var not in bound:
            raise UnboundVariable(cond.var)
    for item in query.returns:
        if item.var not in bound:
            raise UnboundVariable(item.var)
    return query


def _parse_pattern(cursor: _Cursor) -> tuple[list[NodeElem], list[EdgeElem]]:
    nodes = [_parse_node_elem(cursor)]
    edges: list[EdgeElem] = []
    while cursor.at_symbol("-[", "<-["):
        if len(nodes) == MAX_PATTERN_NODES:
            raise PatternTooLong(MAX_PATTERN_NODES)
        edges.append(_parse_edge_elem(cursor))
        nodes.append(_parse_node_elem(cursor))
    return nodes, edges


def _parse_node_elem(cursor: _Cursor) -> NodeElem:
    cursor.expect_symbol("(")
    var = cursor.expect_identifier("variable name").lexeme
    label = None
    if cursor.at_symbol(":"):
        cursor.advance()
        label = cursor.expect_identifier("node label").lexeme
    cursor.expect_symbol(")")
    return NodeElem(var=var, label=label)


def _parse_edge_elem(cursor: _Cursor) -> EdgeElem:
    opener = cursor.advance()  # "-[" or "<-[", guarded by caller
    direction = FORWARD if opener.lexeme == "-[" else REVERSE
    var = None
    token = cursor.peek()
    if token is not None and token.kind == "identifier":
        var = cursor.advance().lexeme
    type_name = None
    if cursor.at_symbol(":"):
        cursor.advance()
        type_name = cursor.expect_identifier("edge type").lexeme
    cursor.expect_symbol("]->" if direction == FORWARD else "]-")
    return EdgeElem(var=var, type_name=type_name, direction=direction)


def _parse_condition(cursor: _Cursor) -> Condition:
    var = cursor.expect_identifier("variable name").lexeme
    cursor.expect_symbol(".")
    key = cursor.expect_identifier("property key").lexeme
    token = cursor.peek()
    if token is None:
        raise ParseError(cursor.end, "comparison operator", "end of input")
    if token.kind == "keyword" and token.lexeme == "CONTAINS":
        op = "CONTAINS"
    elif token.kind == "symbol" and token.lexeme in ("=", "<>", "<", "<=", ">", ">="):
        op = token.lexeme
    else:
        raise ParseError(token.position, "comparison operator", repr(token.lexeme))
    cursor.advance()
    literal_token = cursor.peek()
    if literal_token is None:
        raise ParseError(cursor.end, "literal", "end of input")
    if literal_token.kind not in ("string", "number"):
        raise ParseError(literal_token.position, "literal", repr(literal_token.lexeme))
    cursor.advance()
    return Condition(var=var, key=key, op=op, literal=literal_token.value)


def _parse_return_item(cursor: _Cursor) -> ReturnItem:
    var = cursor.expect_identifier("variable name").lexeme
    if cursor.at_symbol("."):
        cursor.advance()
        key = cursor.expect_identifier("property key").lexeme
        return ReturnItem(var=var, key=key)
    return ReturnItem(var=var)
