"""Run ledger storage using SQLAlchemy."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Generator, Iterable, List, Optional

from sqlalchemy import create_engine, select
from sqlalchemy.orm import Session, declarative_base, scoped_session, sessionmaker

logger = logging.getLogger(__name__)

engine = None
SessionLocal = scoped_session(sessionmaker(autocommit=False, autoflush=False))
Base = declarative_base()


def init_db(database_url: str) -> None:
    """Initialise the engine once and create the ledger tables."""
    global engine

    if engine is None:
        engine = create_engine(database_url, future=True)
        SessionLocal.configure(bind=engine)

        # Registers the ledger tables with the metadata
        from models import VerificationRun  # noqa: F401

        Base.metadata.create_all(bind=engine)
        logger.debug("Run ledger ready at %s", database_url)


@contextmanager
def session_scope() -> Generator[Session, None, None]:
    """Provide a transactional scope around a series of operations."""
    session = SessionLocal()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def record_cells(cells: Iterable, *, suites: Iterable[str], seed: Optional[int], report_paths: dict | None = None) -> List[int]:
    """Store one VerificationRun row per cell report; returns the new row ids."""
    from models import VerificationRun

    suite_label = ",".join(suites)
    report_paths = report_paths or {}
    ids: List[int] = []
    with session_scope() as session:
        rows = []
        for cell in cells:
            counts = cell.counts()
            row = VerificationRun(
                q=cell.q,
                dim=cell.dim,
                suites=suite_label,
                passed=cell.passed,
                check_count=len(cell.checks),
                failure_count=counts["fail"],
                skip_count=counts["skip"],
                seed=seed,
                report_path=report_paths.get((cell.q, cell.dim)),
                summary_json={"failures": [check.name for check in cell.failures], "counts": counts},
            )
            session.add(row)
            rows.append(row)
        session.flush()
        ids = [row.id for row in rows]
    logger.info("Recorded %s verification cells", len(ids))
    return ids


def recent_runs(limit: int = 20) -> List[dict]:
    from models import VerificationRun

    with session_scope() as session:
        query = select(VerificationRun).order_by(VerificationRun.id.desc()).limit(limit)
        return [row.to_dict() for row in session.scalars(query)]
