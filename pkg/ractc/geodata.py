"""
Ingest regions, POI attributes and trips, and build the OD frame series, the Haversine
distance matrix, the binary attribute matrix and hour-of-day buckets.

All CSV readers skip blank lines and lines starting with '#', accept an optional header
line and collect malformed lines into a RejectReport instead of failing the whole file.
"""
import csv
import datetime
import io
import json
import re

import attr
import numpy as np
import pytz

from ractc.ractcbase import RactcDataError, RactcUsageError, read_archive, write_archive


EARTH_RADIUS_KM = 6371.0
SECONDS_PER_DAY = 86400
SECONDS_PER_HOUR = 3600

_OFFSET_PATTERN = re.compile(r'^([+-])(\d{2}):?(\d{2})$')


class TripStreamError(RactcDataError):
    """ The trip stream failed part way; partial_count trips were read before the failure """
    def __init__(self, message, partial_count=0):
        RactcDataError.__init__(self, message)
        self.partial_count = partial_count


def _validate_latitude(instance, attribute, value):
    if not -90.0 <= value <= 90.0:
        raise RactcDataError('ERROR: Region %s latitude %s outside [-90, 90]' % (instance.id, value))


def _validate_longitude(instance, attribute, value):
    if not -180.0 <= value <= 180.0:
        raise RactcDataError('ERROR: Region %s longitude %s outside [-180, 180]' % (
            instance.id, value))


def _validate_population(instance, attribute, value):
    if value < 0:
        raise RactcDataError('ERROR: Region %s has negative population %s' % (instance.id, value))


@attr.s(frozen=True)
class Region(object):
    """ A region node: dense id, centroid, POI attribute set and population """
    id = attr.ib(converter=int)
    lat = attr.ib(converter=float, validator=_validate_latitude)
    lon = attr.ib(converter=float, validator=_validate_longitude)
    population = attr.ib(converter=float, validator=_validate_population)
    attributes = attr.ib(default=frozenset(), converter=frozenset)


class RegionTable(object):
    """ Regions with dense ids 0..N-1 plus the attribute vocabulary """

    def __init__(self, regions, attribute_names):
        self.regions = list(regions)
        self.attribute_names = list(attribute_names)
        for index, region in enumerate(self.regions):
            if region.id != index:
                raise RactcDataError('ERROR: Region ids must be dense 0..N-1; position %s holds id %s'
                                     % (index, region.id))
            for attribute_id in region.attributes:
                if not 0 <= attribute_id < len(self.attribute_names):
                    raise RactcDataError('ERROR: Region %s references attribute %s but M = %s' % (
                        region.id, attribute_id, len(self.attribute_names)))

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __getitem__(self, index):
        return self.regions[index]

    @property
    def attribute_count(self):
        return len(self.attribute_names)

    @property
    def populations(self):
        return np.array([region.population for region in self.regions], dtype=np.float64)

    @property
    def coordinates(self):
        return np.array([[region.lat, region.lon] for region in self.regions], dtype=np.float64)


@attr.s(frozen=True)
class TripRecord(object):
    """ One trip: origin region, destination region, epoch seconds UTC """
    origin = attr.ib()
    destination = attr.ib()
    timestamp = attr.ib()


@attr.s
class RejectReport(object):
    """ Malformed input lines with their 1-based line numbers """
    source = attr.ib(default='')
    rejects = attr.ib(factory=list)

    def add(self, line_number, reason, text):
        self.rejects.append((line_number, reason, text))

    def __len__(self):
        return len(self.rejects)

    def line_numbers(self):
        return [line_number for line_number, _, _ in self.rejects]

    def summary(self, limit=5):
        if not self.rejects:
            return '%s: no rejected lines' % (self.source or 'input')
        shown = ', '.join('line %s (%s)' % (line_number, reason)
                          for line_number, reason, _ in self.rejects[:limit])
        more = '' if len(self.rejects) <= limit else ' and %s more' % (len(self.rejects) - limit)
        return '%s: %s rejected lines: %s%s' % (
            self.source or 'input', len(self.rejects), shown, more)


@attr.s(frozen=True, eq=False)
class ODSeries(object):
    """
    Frame k counts trips whose timestamp falls in [t0 + k*tau, t0 + (k+1)*tau).
    out_of_span counts trips that fell outside the covered span.
    """
    t0 = attr.ib()
    tau = attr.ib()
    frames = attr.ib(repr=False)
    out_of_span = attr.ib(default=0)

    @property
    def frame_count(self):
        return self.frames.shape[0]

    @property
    def region_count(self):
        return self.frames.shape[1]

    def frame_start(self, index):
        return self.t0 + index * self.tau

    def hours(self, tz=pytz.utc):
        """ Hour-of-day bucket of every frame start """
        return np.array([bucketize(self.frame_start(k), tz) for k in range(self.frame_count)],
                        dtype=np.int64)


@attr.s(frozen=True, eq=False)
class DistanceMatrix(object):
    """ Symmetric N x N great-circle distances in kilometers """
    values = attr.ib(repr=False)


@attr.s(frozen=True, eq=False)
class AttributeMatrix(object):
    """ Binary N x M region-attribute indicator matrix """
    values = attr.ib(repr=False)


def _data_rows(stream, header_first_field):
    """ Yield (line number, fields) for data lines, skipping comments, blanks and the header """
    seen_data = False
    for line_number, fields in enumerate(csv.reader(stream), start=1):
        if not fields or not ''.join(fields).strip():
            continue
        if fields[0].lstrip().startswith('#'):
            continue
        fields = [field.strip() for field in fields]
        if not seen_data and fields[0] == header_first_field:
            seen_data = True
            continue
        seen_data = True
        yield line_number, fields


def parse_timestamp(text):
    """
    Parse an ISO 8601 timestamp (naive values are UTC) or epoch seconds into epoch seconds.
    """
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        value = None
    if value is not None:
        if not np.isfinite(value):
            raise ValueError('non-finite timestamp "%s"' % text)
        return value
    if text.endswith('Z') or text.endswith('z'):
        text = text[:-1] + '+00:00'
    parsed = datetime.datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        parsed = pytz.utc.localize(parsed)
    return parsed.timestamp()


def format_timestamp(epoch_seconds):
    """ ISO 8601 UTC text with a Z suffix for integer epoch seconds """
    moment = datetime.datetime.fromtimestamp(int(epoch_seconds), pytz.utc)
    return moment.strftime('%Y-%m-%dT%H:%M:%SZ')


def parse_regions(stream, source='regions.csv'):
    """
    Read `id,lat,lon,population` lines.
    :return: (list of Region sorted by id, RejectReport)
    """
    report = RejectReport(source=source)
    regions = {}
    for line_number, fields in _data_rows(stream, 'id'):
        if len(fields) != 4:
            report.add(line_number, 'expected 4 fields', ','.join(fields))
            continue
        try:
            region = Region(id=int(fields[0]), lat=fields[1], lon=fields[2], population=fields[3])
        except (ValueError, RactcDataError) as err:
            report.add(line_number, str(err), ','.join(fields))
            continue
        if region.id in regions:
            report.add(line_number, 'duplicate region id %s' % region.id, ','.join(fields))
            continue
        regions[region.id] = region
    return [regions[key] for key in sorted(regions)], report


def parse_attributes(stream, region_count, attribute_count=None, source='attributes.csv'):
    """
    Read `region_id,attribute_id` lines.
    :param attribute_count: vocabulary size M; when given, ids >= M are rejected
    :return: (dict region id -> set of attribute ids, RejectReport)
    """
    report = RejectReport(source=source)
    attributes = {}
    for line_number, fields in _data_rows(stream, 'region_id'):
        try:
            region_id, attribute_id = int(fields[0]), int(fields[1])
        except (ValueError, IndexError):
            report.add(line_number, 'expected two integer fields', ','.join(fields))
            continue
        if not 0 <= region_id < region_count:
            report.add(line_number, 'unknown region id %s' % region_id, ','.join(fields))
            continue
        if attribute_id < 0:
            report.add(line_number, 'negative attribute id %s' % attribute_id, ','.join(fields))
            continue
        if attribute_count is not None and attribute_id >= attribute_count:
            report.add(line_number, 'attribute id %s outside the vocabulary of %s' % (
                attribute_id, attribute_count), ','.join(fields))
            continue
        attributes.setdefault(region_id, set()).add(attribute_id)
    return attributes, report


def parse_attribute_vocab(stream, source='attribute_vocab.csv'):
    """
    Read `attribute_id,name` lines; ids must be dense 0..M-1.
    :return: (list of names indexed by attribute id, RejectReport)
    """
    report = RejectReport(source=source)
    names = {}
    for line_number, fields in _data_rows(stream, 'attribute_id'):
        try:
            names[int(fields[0])] = fields[1]
        except (ValueError, IndexError):
            report.add(line_number, 'expected attribute_id,name', ','.join(fields))
    if sorted(names) != list(range(len(names))):
        raise RactcDataError('ERROR: %s: attribute ids must be dense 0..M-1' % source)
    return [names[key] for key in sorted(names)], report


def load_region_map(stream, region_count, source='region_map.csv'):
    """ Read the `external_code,region_id` sidecar that maps external tract codes to dense ids """
    report = RejectReport(source=source)
    mapping = {}
    for line_number, fields in _data_rows(stream, 'external_code'):
        try:
            region_id = int(fields[1])
        except (ValueError, IndexError):
            report.add(line_number, 'expected external_code,region_id', ','.join(fields))
            continue
        if not 0 <= region_id < region_count:
            report.add(line_number, 'unknown region id %s' % region_id, ','.join(fields))
            continue
        mapping[fields[0]] = region_id
    return mapping, report


def build_region_table(regions, attributes, attribute_names):
    """ Attach attribute sets to parsed regions and return the RegionTable """
    regions = [attr.evolve(region, attributes=attributes.get(region.id, ()))
               for region in regions]
    return RegionTable(regions, attribute_names)


def _resolve_region(text, region_count, region_map):
    if region_map is not None:
        if text not in region_map:
            raise ValueError('unknown region code "%s"' % text)
        return region_map[text]
    region_id = int(text)
    if not 0 <= region_id < region_count:
        raise ValueError('unknown region id %s' % region_id)
    return region_id


def parse_trips(stream, regions, region_map=None, source='trips.csv'):
    """
    Read `origin_id,dest_id,iso8601_timestamp` lines in input order.
    :param regions: RegionTable (or region count) used to validate ids
    :param region_map: optional external code -> dense id mapping
    :return: (list of TripRecord, RejectReport)
    """
    region_count = regions if isinstance(regions, int) else len(regions)
    report = RejectReport(source=source)
    trips = []
    try:
        for line_number, fields in _data_rows(stream, 'origin_id'):
            if len(fields) != 3:
                report.add(line_number, 'expected 3 fields', ','.join(fields))
                continue
            try:
                origin = _resolve_region(fields[0], region_count, region_map)
                destination = _resolve_region(fields[1], region_count, region_map)
            except ValueError as err:
                report.add(line_number, str(err), ','.join(fields))
                continue
            try:
                timestamp = parse_timestamp(fields[2])
            except (ValueError, OverflowError):
                report.add(line_number, 'unparseable timestamp "%s"' % fields[2], ','.join(fields))
                continue
            trips.append(TripRecord(origin=origin, destination=destination, timestamp=timestamp))
    except (IOError, UnicodeDecodeError, csv.Error) as err:
        raise TripStreamError('ERROR: %s: trip stream failed after %s records: %s' % (
            source, len(trips), err), partial_count=len(trips))
    return trips, report


def build_od_series(trips, t0, tau, frame_count, region_count=None):
    """
    Bucket trips into half-open frames [t0 + k*tau, t0 + (k+1)*tau), k < frame_count.
    A trip exactly on a boundary belongs to the later frame; trips outside the span are
    counted in out_of_span.
    """
    if frame_count <= 0:
        raise RactcUsageError('ERROR: frame_count must be positive, got %s' % frame_count)
    if tau <= 0:
        raise RactcUsageError('ERROR: tau must be positive, got %s' % tau)
    if region_count is None:
        region_count = 1 + max([max(trip.origin, trip.destination) for trip in trips] or [0])
    frames = np.zeros((frame_count, region_count, region_count), dtype=np.int64)
    if not trips:
        return ODSeries(t0=t0, tau=tau, frames=frames, out_of_span=0)
    origins = np.array([trip.origin for trip in trips], dtype=np.int64)
    destinations = np.array([trip.destination for trip in trips], dtype=np.int64)
    offsets = np.array([trip.timestamp for trip in trips], dtype=np.float64) - t0
    indices = np.floor_divide(offsets, tau).astype(np.int64)
    in_span = (offsets >= 0) & (indices < frame_count)
    np.add.at(frames, (indices[in_span], origins[in_span], destinations[in_span]), 1)
    return ODSeries(t0=t0, tau=tau, frames=frames, out_of_span=int(np.sum(~in_span)))


def _haversine_arrays(lat1, lon1, lat2, lon2):
    phi1, lambda1, phi2, lambda2 = map(np.radians, (lat1, lon1, lat2, lon2))
    h = (np.sin((phi2 - phi1) / 2.0) ** 2 +
         np.cos(phi1) * np.cos(phi2) * np.sin((lambda2 - lambda1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def haversine(a, b):
    """
    Great-circle distance in kilometers between two (lat, lon) points in degrees.
    The pair is put in canonical order first so that haversine(a, b) == haversine(b, a).
    """
    first, second = sorted([tuple(map(float, a)), tuple(map(float, b))])
    return float(_haversine_arrays(first[0], first[1], second[0], second[1]))


def build_distance_matrix(regions):
    """ Pairwise Haversine distances, each unordered pair computed once """
    coords = regions.coordinates if isinstance(regions, RegionTable) else np.asarray(regions)
    count = coords.shape[0]
    if count < 1:
        raise RactcDataError('ERROR: A distance matrix needs at least one region')
    values = np.zeros((count, count))
    for i in range(count - 1):
        row = _haversine_arrays(coords[i, 0], coords[i, 1], coords[i + 1:, 0], coords[i + 1:, 1])
        values[i, i + 1:] = row
        values[i + 1:, i] = row
    return DistanceMatrix(values=values)


def build_attribute_matrix(regions, attribute_count):
    """ Binary N x M matrix with ones at each region's attribute indices """
    values = np.zeros((len(regions), attribute_count), dtype=np.int64)
    for row, region in enumerate(regions):
        for attribute_id in region.attributes:
            if not 0 <= attribute_id < attribute_count:
                raise RactcDataError('ERROR: Region %s attribute %s is not below M = %s' % (
                    region.id, attribute_id, attribute_count))
            values[row, attribute_id] = 1
    return AttributeMatrix(values=values)


def resolve_timezone(name):
    """ Return a tzinfo for 'UTC', an Olson name or a fixed offset such as '+05:30' """
    if name in (None, '', 'UTC', 'utc', 'Z'):
        return pytz.utc
    match = _OFFSET_PATTERN.match(name)
    if match:
        sign = -1 if match.group(1) == '-' else 1
        return pytz.FixedOffset(sign * (int(match.group(2)) * 60 + int(match.group(3))))
    try:
        return pytz.timezone(name)
    except pytz.UnknownTimeZoneError:
        raise RactcUsageError('ERROR: Unknown timezone "%s"' % name)


def bucketize(timestamp, tz=pytz.utc):
    """ Hour of day 0..23 of an epoch-seconds timestamp in the given timezone """
    return datetime.datetime.fromtimestamp(timestamp, tz).hour


def save_od_series(path, series):
    """ Cache an ODSeries as a deterministic archive (frames.npy + meta.json) """
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.ascontiguousarray(series.frames, dtype='<i8'))
    meta = {'t0': series.t0, 'tau': series.tau, 'out_of_span': series.out_of_span}
    write_archive(path, [('frames.npy', buffer.getvalue()),
                         ('meta.json', json.dumps(meta, sort_keys=True).encode('utf-8'))])


def load_od_series(path):
    """ Read an ODSeries cached by save_od_series """
    members = dict(read_archive(path))
    try:
        frames = np.lib.format.read_array(io.BytesIO(members['frames.npy']))
        meta = json.loads(members['meta.json'].decode('utf-8'))
    except KeyError as err:
        raise RactcDataError('ERROR: OD series cache "%s" is missing %s' % (path, err))
    return ODSeries(t0=meta['t0'], tau=meta['tau'], frames=frames.astype(np.int64),
                    out_of_span=meta['out_of_span'])
