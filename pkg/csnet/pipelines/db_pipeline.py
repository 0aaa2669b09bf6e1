from __future__ import (
    annotations,
)  # needed so that from_row can define the Result return type

import json
import logging
import os

from sqlalchemy import JSON, Column, DateTime, Integer, String, create_engine, func
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import declarative_base, sessionmaker

from csnet.items import ResultRow

Base = declarative_base()


def get_session(url: str | None = None):
    engine = create_engine(url or os.environ.get("DATABASE_URL"), echo=False)
    Session = sessionmaker(bind=engine)
    session = Session()

    return session


class Result(Base):
    __tablename__ = "results"
    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, index=True)
    subcommand = Column(String)
    schema_version = Column(Integer)
    row_kind = Column(String)
    label = Column(String)
    payload = Column(JSON)
    update_timestamp = Column(DateTime, onupdate=func.now())

    @staticmethod
    def from_row(row: ResultRow, run_id: str) -> Result:
        payload = dict(row)
        if isinstance(payload.get("details"), str):
            payload["details"] = json.loads(payload["details"])
        return Result(
            run_id=run_id,
            subcommand=row.get("subcommand"),
            schema_version=row.get("schema_version"),
            row_kind=row.get("row_kind"),
            label=row.get("label"),
            payload=payload,
        )

    def __str__(self):
        return f"<Result run_id={self.run_id}, row_kind={self.row_kind}, label={self.label}>"


class DatabasePipeline:
    def __init__(self, session=None):
        self.session = session or get_session()

    def open_run(self, experiment):
        self.run_id = experiment.run_id

    def close_run(self, experiment, failed: bool = False):
        self.session.close()

    def process_item(self, item: ResultRow, experiment):
        result = Result.from_row(item, self.run_id)
        try:
            self.session.add(result)
            self.session.commit()
        except SQLAlchemyError as e:
            logging.warning("Error when putting to DB")
            logging.warning(e)
            self.session.rollback()
        return item
