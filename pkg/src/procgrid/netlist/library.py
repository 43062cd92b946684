"""Library process declarations available to every design.

The file-transfer elements connect a signal to a host file. Their ports carry
the wildcard type and adopt the connecting signal's type; the engine services
them between cycles instead of running a program.
"""

from __future__ import annotations

from .ast import ANY_TYPE, PortDecl, ProcessDecl

FILE_SOURCE = ProcessDecl(
    name="file_source",
    ae_class="MEM",
    ports=(PortDecl("o", "out", ANY_TYPE),),
    native="file_source",
)

FILE_SINK = ProcessDecl(
    name="file_sink",
    ae_class="MEM",
    ports=(PortDecl("i", "in", ANY_TYPE),),
    native="file_sink",
)

LIBRARY_DECLS = {d.name: d for d in (FILE_SOURCE, FILE_SINK)}
