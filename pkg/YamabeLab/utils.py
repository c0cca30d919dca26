# -*- coding: utf-8 -*-
import logging
import logging.config
import os
import queue
from threading import Lock, Thread

from . import cfg


loggers = {}


def get_logger(name):
    if name in loggers.keys():
        return loggers[name]
    MAIN_FORMAT = ("%(asctime)s - %(process)d/%(threadName)s - %(lineno)d in %(filename)s" +
                   " [%(levelname)s] %(message)s")
    handlers = {'console': {'class': 'logging.StreamHandler',
                            'formatter': 'info',
                            'level': cfg.LOG_LEVEL}}
    if cfg.LOG_FILE:
        handlers['file'] = {'class': 'logging.FileHandler',
                            'formatter': 'info',
                            'filename': cfg.LOG_FILE,
                            'level': cfg.LOG_LEVEL}
    LOG_CONFIG = {'version': 1,
                  'disable_existing_loggers': False,
                  'formatters': {'error': {'format': MAIN_FORMAT},
                                 'info': {'format': MAIN_FORMAT},
                                 'debug': {'format': MAIN_FORMAT}},
                  'handlers': handlers,
                  'root': {'handlers': tuple(handlers), 'level': 'DEBUG'}}
    logging.config.dictConfig(LOG_CONFIG)
    logger = logging.getLogger(name)
    logger.setLevel(cfg.LOG_LEVEL)
    loggers[name] = logger
    return logger


logger = get_logger('utils')


def resolve_threads(threads=None):
    """
    Worker count: explicit argument, then ``YAMABE_LAB_THREADS``, then the
    number of logical cores.

    :param threads: Explicit worker count, or None.
    :type threads: int | None
    :rtype: int

    raises:
        * ValueError: When the resolved count is not a positive integer.
    """
    if threads is None:
        env = os.environ.get(cfg.THREADS_ENV)
        if env not in (None, ''):
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValueError('Worker count must be positive, got {}'.format(threads))
    return threads


class WorkerPool(object):
    """
    A bounded pool of threads that maps a function over a list of jobs.

    Jobs are pulled from a :class:`queue.Queue` by ``threads`` workers.
    Results come back in job order whatever the completion order. If any job
    raises, the pool drains and the exception of the lowest failing job is
    raised in the caller.
    """

    def __init__(self, threads=None):
        self.threads = resolve_threads(threads)
        self._lock = Lock()

    def map(self, func, jobs):
        jobs = list(jobs)
        if not jobs:
            return []
        results = [None] * len(jobs)
        errors = {}
        pending = queue.Queue()
        for item in enumerate(jobs):
            pending.put(item)

        def work():
            while True:
                try:
                    index, job = pending.get_nowait()
                except queue.Empty:
                    return
                try:
                    value = func(job)
                except Exception as error:
                    logger.error('Job %s failed: %s', index, error)
                    with self._lock:
                        errors[index] = error
                else:
                    results[index] = value

        workers = [Thread(target=work, name='worker-{}'.format(k))
                   for k in range(min(self.threads, len(jobs)))]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()
        if errors:
            raise errors[min(errors)]
        return results
