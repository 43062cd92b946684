"""Parser for the design source language (`.pg` files).

Brace-delimited declarations, `#` line comments. Process bodies mix port,
instance, and signal declarations; leaf behavior lives in a line-oriented
`program { ... }` block.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError
from ..isa import parse_program
from .ast import (
    AE_CLASSES,
    BUILTIN_SIGNEDNESS,
    Design,
    EndpointRef,
    InstDecl,
    PortDecl,
    ProcessDecl,
    SignalDecl,
    SourceLoc,
    ValueType,
)

RESERVED = {
    "design", "type", "process", "class", "in", "out", "inst", "signal",
    "program", "top", "from", "to", "every", "sync", "async",
}

LIBRARY_NAMES = {"file_source", "file_sink"}

_TOKEN_RE = re.compile(
    r"(?P<int>-?(?:0[xX][0-9a-fA-F]+|\d+))"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>[{}:.,@()])"
    r"|(?P<bad>\S)"
)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT INT PUNCT PROGBODY EOF
    value: object
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        lineno = i + 1
        raw = lines[i]
        code = raw.split("#", 1)[0]
        for m in _TOKEN_RE.finditer(code):
            col = m.start() + 1
            if m.lastgroup == "int":
                tokens.append(Token("INT", int(m.group(), 0), lineno, col))
            elif m.lastgroup == "ident":
                tokens.append(Token("IDENT", m.group(), lineno, col))
            elif m.lastgroup == "punct":
                tokens.append(Token("PUNCT", m.group(), lineno, col))
            else:
                raise ParseError(f"unexpected character '{m.group()}'", lineno, col)
        # entering a program body: capture raw lines until the closing brace
        if (
            len(tokens) >= 2
            and tokens[-1].kind == "PUNCT"
            and tokens[-1].value == "{"
            and tokens[-2].kind == "IDENT"
            and tokens[-2].value == "program"
        ):
            body: list[tuple[int, str]] = []
            j = i + 1
            while j < len(lines):
                body_code = lines[j].split("#", 1)[0]
                if body_code.strip() == "}":
                    break
                body.append((j + 1, body_code))
                j += 1
            else:
                raise ParseError("program block is missing its closing '}'", lineno, col)
            tokens.append(Token("PROGBODY", tuple(body), lineno, col))
            tokens.append(Token("PUNCT", "}", j + 1, 1))
            i = j + 1
            continue
        i += 1
    tokens.append(Token("EOF", None, len(lines), 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.typedefs: dict[str, ValueType] = {}

    # --- token plumbing ---

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        got = "end of input" if tok.kind == "EOF" else repr(tok.value)
        return ParseError(f"expected {expected}, got {got}", tok.line, tok.col)

    def expect_punct(self, ch: str) -> Token:
        tok = self.peek()
        if tok.kind != "PUNCT" or tok.value != ch:
            raise self.fail(f"'{ch}'", tok)
        return self.next()

    def accept_punct(self, ch: str) -> bool:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.value == ch:
            self.next()
            return True
        return False

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value != word:
            raise self.fail(f"'{word}'", tok)
        return self.next()

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.value in words

    def expect_name(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.fail(f"{what} name", tok)
        if tok.value in RESERVED:
            raise ParseError(f"'{tok.value}' is a reserved word", tok.line, tok.col)
        return self.next()

    def expect_int(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "INT":
            raise self.fail(what, tok)
        return self.next()

    # --- grammar ---

    def parse_design(self) -> Design:
        self.expect_keyword("design")
        name = self.expect_name("design").value
        types: list[ValueType] = []
        decls: list[ProcessDecl] = []
        decl_names: set[str] = set()
        top: str | None = None
        while self.peek().kind != "EOF":
            if self.at_keyword("type"):
                types.append(self.parse_typedef())
            elif self.at_keyword("process"):
                decl = self.parse_process()
                if decl.name in decl_names:
                    raise ParseError(
                        f"process '{decl.name}' already declared",
                        decl.loc.line, decl.loc.col,
                    )
                decl_names.add(decl.name)
                decls.append(decl)
            elif self.at_keyword("top"):
                tok = self.next()
                if top is not None:
                    raise ParseError("duplicate top declaration", tok.line, tok.col)
                top = self.expect_name("top process").value
            else:
                raise self.fail("'type', 'process', or 'top'")
        if top is None:
            tok = self.peek()
            raise ParseError("missing top declaration", tok.line, tok.col)
        return Design(name, tuple(types), tuple(decls), top)

    def parse_typedef(self) -> ValueType:
        self.expect_keyword("type")
        name_tok = self.expect_name("type")
        if name_tok.value in self.typedefs or name_tok.value in BUILTIN_SIGNEDNESS:
            raise ParseError(
                f"type '{name_tok.value}' already defined", name_tok.line, name_tok.col
            )
        self.expect_punct(":")
        base = self.parse_typeref()
        vt = ValueType(name_tok.value, base.width, base.signedness)
        self.typedefs[vt.name] = vt
        return vt

    def parse_typeref(self) -> ValueType:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.fail("type", tok)
        if tok.value in BUILTIN_SIGNEDNESS:
            self.next()
            self.expect_punct("(")
            width = self.expect_int("bit width").value
            self.expect_punct(")")
            return ValueType(tok.value, width, tok.value)
        if tok.value in self.typedefs:
            self.next()
            return self.typedefs[tok.value]
        raise ParseError(f"unknown type '{tok.value}'", tok.line, tok.col)

    def parse_process(self) -> ProcessDecl:
        kw = self.expect_keyword("process")
        name_tok = self.expect_name("process")
        if name_tok.value in LIBRARY_NAMES:
            raise ParseError(
                f"'{name_tok.value}' is a library process and cannot be redefined",
                name_tok.line, name_tok.col,
            )
        self.expect_punct("{")
        ae_class: str | None = None
        ports: list[PortDecl] = []
        insts: list[InstDecl] = []
        signals: list[SignalDecl] = []
        program = None
        while not self.accept_punct("}"):
            tok = self.peek()
            if tok.kind == "EOF":
                raise ParseError(
                    f"process '{name_tok.value}' is missing its closing '}}' "
                    f"(opened at line {kw.line})",
                    tok.line, tok.col,
                )
            if self.at_keyword("class"):
                tok = self.next()
                if ae_class is not None:
                    raise ParseError("duplicate class declaration", tok.line, tok.col)
                cls = self.next()
                if cls.kind != "IDENT" or cls.value not in AE_CLASSES:
                    raise self.fail("one of " + "/".join(AE_CLASSES), cls)
                ae_class = cls.value
            elif self.at_keyword("in", "out"):
                direction = self.next().value
                pname = self.expect_name("port")
                self.expect_punct(":")
                vt = self.parse_typeref()
                ports.append(
                    PortDecl(pname.value, direction, vt, SourceLoc(pname.line, pname.col))
                )
            elif self.at_keyword("inst"):
                self.next()
                iname = self.expect_name("instance")
                self.expect_punct(":")
                dname = self.peek()
                if dname.kind != "IDENT":
                    raise self.fail("process name", dname)
                self.next()
                insts.append(
                    InstDecl(iname.value, dname.value, SourceLoc(iname.line, iname.col))
                )
            elif self.at_keyword("signal"):
                signals.append(self.parse_signal())
            elif self.at_keyword("program"):
                tok = self.next()
                if program is not None:
                    raise ParseError("duplicate program block", tok.line, tok.col)
                self.expect_punct("{")
                body = self.peek()
                if body.kind != "PROGBODY":
                    # `program {` must end its line; the tokenizer only builds a
                    # body when it does
                    raise ParseError(
                        "program body must start on the line after '{'",
                        tok.line, tok.col,
                    )
                self.next()
                program = parse_program(list(body.value))
                self.expect_punct("}")
            else:
                raise self.fail(
                    "'class', 'in', 'out', 'inst', 'signal', 'program', or '}'"
                )
        return ProcessDecl(
            name=name_tok.value,
            ae_class=ae_class or "STAN",
            ports=tuple(ports),
            insts=tuple(insts),
            signals=tuple(signals),
            program=program,
            loc=SourceLoc(name_tok.line, name_tok.col),
        )

    def parse_signal(self) -> SignalDecl:
        self.expect_keyword("signal")
        sid = self.expect_name("signal")
        self.expect_punct(":")
        vt = self.parse_typeref()
        period = 1
        if self.accept_punct("@"):
            self.expect_keyword("every")
            period = self.expect_int("slot period").value
        mode = "sync"
        if self.at_keyword("sync", "async"):
            mode = self.next().value
        self.expect_keyword("from")
        source = self.parse_endpoint()
        self.expect_keyword("to")
        dests = [self.parse_endpoint()]
        while self.accept_punct(","):
            dests.append(self.parse_endpoint())
        return SignalDecl(
            id=sid.value,
            value_type=vt,
            mode=mode,
            period=period,
            source=source,
            dests=tuple(dests),
            loc=SourceLoc(sid.line, sid.col),
        )

    def parse_endpoint(self) -> EndpointRef:
        first = self.expect_name("endpoint")
        if self.accept_punct("."):
            port = self.expect_name("port")
            return EndpointRef(first.value, port.value)
        return EndpointRef(None, first.value)


def parse_design(text: str) -> Design:
    """Parse full design source; raises ParseError with line/column on failure."""
    return _Parser(text).parse_design()
