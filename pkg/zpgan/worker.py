# zpgan/worker.py
import logging

from celery import Celery

from zpgan.config import settings

logger = logging.getLogger(__name__)

# Broker/backend come from Settings, which already prefers REDIS_URL over localhost.
celery_app = Celery(
    settings.APP_NAME,
    broker=settings.CELERY_BROKER_URL,
    backend=settings.CELERY_RESULT_BACKEND,
    broker_connection_retry_on_startup=True,
    include=["zpgan.training.tasks"],
)

celery_app.conf.update(
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",
    timezone="UTC",
    enable_utc=True,
    # one training run per worker process; torch already uses the cores
    worker_concurrency=1,
)

logger.debug("celery broker: %s", celery_app.conf.broker_url)
