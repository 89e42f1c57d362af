"""Tokenizer and token stream shared by the text-format parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional

from .errors import ParseError

_BRACKETS: Dict[str, str] = {"(": ")", "{": "}", "[": "]"}


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    quoted: bool = False


def _blank_out(match: re.Match) -> str:
    # keep newlines so line numbers survive comment removal
    return "\n" * match.group(0).count("\n")


def tokenize(
    text: str,
    *,
    punctuation: str = "",
    line_comment: Optional[str] = "#",
    block_comments: bool = False,
    source: str = "",
) -> List[Token]:
    """Split ``text`` into tokens; quoted strings become one token without their quotes."""
    # line continuations: drop the backslash, keep the newline for line numbering
    text = re.sub(r"\\(?=\r?\n)", " ", text)
    if block_comments:
        text = re.sub(r"/\*.*?\*/", _blank_out, text, flags=re.S)
    if line_comment:
        # line comments must not eat quoted strings
        text = re.sub(
            r'"(?:[^"\\\n]|\\.)*"|' + re.escape(line_comment) + r"[^\n]*",
            lambda m: m.group(0) if m.group(0).startswith('"') else "",
            text,
        )
    alternatives = [r'"(?P<q>(?:[^"\\]|\\.)*)"']
    if punctuation:
        punct = re.escape(punctuation)
        alternatives += [rf"[{punct}]", rf'[^\s{punct}"]+']
    else:
        alternatives.append(r'[^\s"]+')
    pattern = re.compile("|".join(alternatives))
    tokens: List[Token] = []
    line = 1
    pos = 0
    for match in pattern.finditer(text):
        line += text.count("\n", pos, match.start())
        pos = match.start()
        if match.group("q") is not None:
            tokens.append(Token(match.group("q"), line, quoted=True))
        else:
            tokens.append(Token(match.group(0), line))
        line += match.group(0).count("\n")
        pos = match.end()
    check_balanced(tokens, source)
    return tokens


def check_balanced(tokens: List[Token], source: str = "") -> None:
    """Raise a line-numbered ParseError on the first unbalanced bracket."""
    stack: List[Token] = []
    closers = {v: k for k, v in _BRACKETS.items()}
    for tok in tokens:
        if tok.quoted:
            continue
        if tok.text in _BRACKETS:
            stack.append(tok)
        elif tok.text in closers:
            if not stack or stack[-1].text != closers[tok.text]:
                raise ParseError(f"unbalanced '{tok.text}'", tok.line, source)
            stack.pop()
    if stack:
        raise ParseError(f"unclosed '{stack[-1].text}'", stack[-1].line, source)


class TokenStream:
    def __init__(self, tokens: List[Token], source: str = ""):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    @property
    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    @property
    def line(self) -> Optional[int]:
        if self.at_end:
            return self.tokens[-1].line if self.tokens else None
        return self.tokens[self.pos].line

    def peek(self, offset: int = 0) -> Optional[str]:
        idx = self.pos + offset
        return self.tokens[idx].text if idx < len(self.tokens) else None

    def peek_token(self) -> Optional[Token]:
        return self.tokens[self.pos] if not self.at_end else None

    def next(self) -> str:
        if self.at_end:
            raise self.error("unexpected end of input")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok.text

    def accept(self, text: str) -> bool:
        if self.peek() == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> None:
        got = self.peek()
        if got != text:
            raise self.error(f"expected '{text}', got '{got}'")
        self.pos += 1

    def next_int(self) -> int:
        raw = self.next()
        try:
            return int(raw)
        except ValueError:
            try:
                return int(round(float(raw)))
            except ValueError:
                raise self.error(f"expected integer, got '{raw}'") from None

    def next_float(self) -> float:
        raw = self.next()
        try:
            return float(raw)
        except ValueError:
            raise self.error(f"expected number, got '{raw}'") from None

    def skip_past(self, text: str) -> None:
        while not self.at_end and self.next() != text:
            pass

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.source)
