"""Tokenizer for the query language."""

from __future__ import annotations

from .ast import Token
from .errors import LexError

KEYWORDS = frozenset({"MATCH", "WHERE", "AND", "RETURN", "LIMIT", "CONTAINS"})

# Multi-character symbols first so maximal munch works.
SYMBOLS = ("]->", "<-[", "-[", "]-", "<>", "<=", ">=", "(", ")", ":", ",", ".", "=", "<", ">")

_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")


def tokenize(text: str) -> list[Token]:
    """Split query text into tokens; keywords are case-insensitive.

    Token positions are byte offsets into the UTF-8 encoding of `text`,
    so error locations are stable for non-ASCII string literals.
    """
    tokens: list[Token] = []
    i = 0
    byte_pos = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            byte_pos += 1
            continue
        if ch in _IDENT_START:
            start, start_byte = i, byte_pos
            while i < n and text[i] in _IDENT_CONT:
                i += 1
            lexeme = text[start:i]
            byte_pos += i - start
            upper = lexeme.upper()
            if upper in KEYWORDS:
                tokens.append(Token("keyword", upper, start_byte, upper))
            else:
                tokens.append(Token("identifier", lexeme, start_byte, lexeme))
            continue
        if ch in _DIGITS:
            start, start_byte = i, byte_pos
            while i < n and text[i] in _DIGITS:
                i += 1
            is_decimal = False
            if i + 1 < n and text[i] == "." and text[i + 1] in _DIGITS:
                is_decimal = True
                i += 1
                while i < n and text[i] in _DIGITS:
                    i += 1
            lexeme = text[start:i]
            byte_pos += i - start
            value = float(lexeme) if is_decimal else int(lexeme)
            tokens.append(Token("number", lexeme, start_byte, value))
            continue
        if ch == '"':
            token = _scan_string(text, i, byte_pos)
            tokens.append(token)
            i += len(token.lexeme)
            byte_pos += len(token.lexeme.encode("utf-8"))
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token("symbol", sym, byte_pos, sym))
                i += len(sym)
                byte_pos += len(sym)
                break
        else:
            raise LexError(byte_pos, f"illegal character {ch!r}")
    return tokens


def _scan_string(text: str, start: int, start_byte: int) -> Token:
    # start points at the opening quote; unterminated strings report it.
    i = start + 1
    n = len(text)
    chars: list[str] = []
    while i < n:
        ch = text[i]
        if ch == '"':
            return Token("string", text[start : i + 1], start_byte, "".join(chars))
        if ch == "\\":
            if i + 1 < n and text[i + 1] in ('"', "\\"):
                chars.append(text[i + 1])
                i += 2
                continue
            bad_byte = start_byte + len(text[start:i].encode("utf-8"))
            raise LexError(bad_byte, "unsupported escape sequence")
        chars.append(ch)
        i += 1
    raise LexError(start_byte, "unterminated string literal")
