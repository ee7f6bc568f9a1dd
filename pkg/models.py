"""Database models."""

from __future__ import annotations

from datetime import datetime
from typing import Any, Dict

from sqlalchemy import Boolean, Column, DateTime, Integer, JSON, String
from sqlalchemy.ext.mutable import MutableDict

from services.database import Base


class VerificationRun(Base):
    """One (q, N) cell of a ``qdisk verify`` sweep."""

    __tablename__ = "verification_runs"

    id = Column(Integer, primary_key=True)
    q = Column(String(32), nullable=False)
    dim = Column(Integer, nullable=False)
    suites = Column(String(255), nullable=False)
    passed = Column(Boolean, nullable=False, default=False)
    check_count = Column(Integer, nullable=False, default=0)
    failure_count = Column(Integer, nullable=False, default=0)
    skip_count = Column(Integer, nullable=False, default=0)
    seed = Column(Integer, nullable=True)
    report_path = Column(String(512), nullable=True)
    summary_json = Column("summary", MutableDict.as_mutable(JSON), nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "q": self.q,
            "N": self.dim,
            "suites": self.suites.split(",") if self.suites else [],
            "passed": self.passed,
            "checks": self.check_count,
            "failures": self.failure_count,
            "skipped": self.skip_count,
            "seed": self.seed,
            "report_path": self.report_path,
            "summary": self.summary_json,
            "created_at": self.created_at.isoformat() if self.created_at else None,
        }
