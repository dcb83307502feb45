"""QR traceability tokens.

Format (bit-exact): ``PTW-YYYYMMDD-CC-NNNNNN`` where the date is the
window's valid_from date in UTC, CC the two-letter category code and
NNNNNN the permit id zero-padded to at least six digits.  Uniqueness
follows from the embedded permit id.
"""

from __future__ import annotations

import re
from datetime import date

from .errors import PtwError
from .model import CATEGORY_CODES, PermitCategory

_CODE_CATEGORIES = {code: cat for cat, code in CATEGORY_CODES.items()}

_TOKEN_RE = re.compile(r"^PTW-(\d{8})-([A-Z]{2})-(\d{6,})$")


def mint_qr_token(permit_id: int, category: PermitCategory, valid_from: date) -> str:
    return (
        f"PTW-{valid_from.strftime('%Y%m%d')}-{CATEGORY_CODES[category]}-{permit_id:06d}"
    )


def parse_qr_token(token: str) -> tuple[int, PermitCategory, date]:
    """Inverse of mint: returns (permit_id, category, valid_from date)."""
    m = _TOKEN_RE.match(token)
    if not m:
        raise PtwError(f"malformed qr token: {token!r}", code="invalid-qr-token")
    datepart, code, idpart = m.groups()
    if code not in _CODE_CATEGORIES:
        raise PtwError(f"unknown category code in token: {code}", code="invalid-qr-token")
    try:
        when = date(int(datepart[:4]), int(datepart[4:6]), int(datepart[6:8]))
    except ValueError:
        raise PtwError(f"invalid date in token: {datepart}", code="invalid-qr-token") from None
    return int(idpart), _CODE_CATEGORIES[code], when
