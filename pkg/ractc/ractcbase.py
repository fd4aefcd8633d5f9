"""
Base class providing common functionality for the RACTC pipeline stages: verbosity-aware
logging, input checks, deterministic archive writing and the shared error hierarchy.
"""
import datetime
import hashlib
import io
import json
import os
import sys
import warnings
import zipfile

import constants
import settings


# Fixed archive timestamp so that identical inputs produce byte-identical archives
ARCHIVE_DATE_TIME = (1980, 1, 1, 0, 0, 0)


class RactcError(Exception):
    """ Base class for all errors raised by the RACTC pipeline """
    exit_code = constants.EXIT_USAGE


class RactcUsageError(RactcError):
    """ Invalid configuration, arguments or checkpoint for the requested command """
    exit_code = constants.EXIT_USAGE


class RactcDataError(RactcError):
    """ Missing, malformed or degenerate input data """
    exit_code = constants.EXIT_DATA_ERROR


class RactcNumericError(RactcError):
    """ Numerical failure such as a non-finite loss or a shape mismatch on the tape """
    exit_code = constants.EXIT_NUMERIC_ERROR


class RactcWarning(UserWarning):
    """ Non-fatal condition that is counted or flagged rather than raised """
    pass


class RactcBase(object):
    """ Shared base class for RACTC pipeline stages """

    def __init__(self, verbosity=None):
        self.verbosity = settings.verbosity if verbosity is None else verbosity

    def vlog(self, verbose_level=0, *args):
        """
        Output log information if verbosity setting is equal or greater than this verbose level
        """
        if self.verbosity < verbose_level:
            return
        self.log(*args)

    def log(self, *args):
        """ Output log information ignoring verbosity level """
        sys.stdout.write('[' + str(datetime.datetime.now()) + '] ')
        for arg in args:
            sys.stdout.write(str(arg))
            sys.stdout.write(' ')
        sys.stdout.write('\n')
        sys.stdout.flush()

    def log_settings(self, **stage_settings):
        """ Output the effective settings of a stage, one per line """
        self.vlog(1, '%s settings:' % self.__class__.__name__)
        for key in sorted(stage_settings):
            self.vlog(1, '  %s: %s' % (key, stage_settings[key]))

    def log_warnings(self, caught):
        """ Re-log warnings captured with warnings.catch_warnings(record=True) """
        for warning in caught:
            self.vlog(1, 'WARNING: %s' % warning.message)

    def require_file(self, path):
        """
        Check that an input file exists, raising a data error naming the path if it is missing.
        :param path: Absolute or working-directory relative path
        :return: the path
        """
        if not os.path.isfile(path):
            msg = 'ERROR: Required input file "%s" does not exist' % path
            self.vlog(1, msg)
            raise RactcDataError(msg)
        self.vlog(2, 'INFO: Found "%s" containing %s bytes' % (path, os.path.getsize(path)))
        return path

    @staticmethod
    def ensure_directory(path):
        """ Create the directory if needed and return it """
        if path and not os.path.isdir(path):
            os.makedirs(path)
        return path


def warn(message, category=RactcWarning):
    """ Raise a RACTC warning attributed to the caller of the warning site """
    warnings.warn(message, category, stacklevel=3)


def sha256_file(path):
    """ Return the hex SHA-256 digest of a file's contents """
    digest = hashlib.sha256()
    with open(path, 'rb') as input_file:
        for chunk in iter(lambda: input_file.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_json(document):
    """ Serialize a JSON document with sorted keys and no insignificant whitespace """
    return json.dumps(document, sort_keys=True, separators=(',', ':'))


def write_archive(path, members):
    """
    Write a zip archive whose bytes depend only on its members.
    :param path: Output file path
    :param members: list of (member name, bytes) pairs, written in order
    """
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, 'w', zipfile.ZIP_DEFLATED) as archive:
        for name, payload in members:
            info = zipfile.ZipInfo(name, date_time=ARCHIVE_DATE_TIME)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            archive.writestr(info, payload)
    with open(path, 'wb') as output_file:
        output_file.write(buffer.getvalue())


def read_archive(path):
    """ Read a zip archive written by write_archive into an ordered list of (name, bytes) """
    try:
        with zipfile.ZipFile(path, 'r') as archive:
            return [(name, archive.read(name)) for name in archive.namelist()]
    except (IOError, zipfile.BadZipfile) as err:
        raise RactcDataError('ERROR: Unable to read archive "%s": %s' % (path, err))
