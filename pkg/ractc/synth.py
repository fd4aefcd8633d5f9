"""
Deterministic synthetic city and trip generator with a known gravity-type ground truth.

Regions sit on the cells of a square grid (row-major, with jitter), each with an archetype
(residential, office, restaurant, recreation) that drives its POI attributes and its
diurnal demand profile. Trip counts per (slot, origin, destination) are Poisson with
intensity

    base * m_i^a * m_j^b * d_ij^-c * profile(arch_i, arch_j, hour) * weekday_factor * tau / 3600

drawn by inversion from a named stream per (day, slot), so any slot can be regenerated alone.
"""
import csv
import datetime
import io
import math
import os

import attr
import numpy as np
import pytz

import constants
from ractc import geodata
from ractc.ractcbase import RactcUsageError
from ractc.runconfig import STREAM_SYNTH, derive_rng


# 2024-01-01T00:00:00Z, a Monday
DEFAULT_START = 1704067200
POISSON_CHUNK = 500.0

DEFAULT_ATTRIBUTE_NAMES = [
    'housing', 'school', 'office', 'bank', 'restaurant', 'cafe', 'park', 'cinema',
]

DEFAULT_ARCHETYPES = {
    'residential': [0.5, 0.3, 0.0, 0.05, 0.05, 0.05, 0.05, 0.0],
    'office': [0.0, 0.05, 0.55, 0.3, 0.05, 0.05, 0.0, 0.0],
    'restaurant': [0.05, 0.0, 0.05, 0.0, 0.5, 0.3, 0.05, 0.05],
    'recreation': [0.05, 0.0, 0.0, 0.0, 0.1, 0.05, 0.45, 0.35],
}


def _profile(peaks, floor=0.1):
    """ 24-hour profile: floor everywhere plus the given {hour: weight} peaks """
    values = [floor] * 24
    for hour, weight in peaks.items():
        values[hour] += weight
    return values


DEFAULT_PROFILE = _profile({12: 0.3, 13: 0.3, 18: 0.2})

DEFAULT_PROFILES = {
    'residential>office': _profile({7: 1.5, 8: 3.0, 9: 1.5}),
    'office>residential': _profile({17: 1.5, 18: 3.0, 19: 1.5}),
    'office>restaurant': _profile({12: 2.0, 13: 1.0}),
    'residential>recreation': _profile({19: 1.0, 20: 1.5, 21: 1.0}),
    'recreation>residential': _profile({21: 1.0, 22: 1.5, 23: 0.5}),
}


def profile_key(origin_archetype, destination_archetype):
    return '%s>%s' % (origin_archetype, destination_archetype)


def _validate_archetypes(instance, attribute, value):
    for name, probabilities in value.items():
        if len(probabilities) != len(instance.attribute_names):
            raise RactcUsageError('ERROR: Archetype "%s" has %s probabilities for %s attributes' % (
                name, len(probabilities), len(instance.attribute_names)))
        if min(probabilities) < 0 or abs(sum(probabilities) - 1.0) > 1e-9:
            raise RactcUsageError('ERROR: Archetype "%s" probabilities must be >= 0 and sum to 1, '
                                  'got sum %s' % (name, sum(probabilities)))


def _validate_profiles(instance, attribute, value):
    for key, profile in (value or {}).items():
        if len(profile) != 24 or min(profile) < 0:
            raise RactcUsageError('ERROR: Profile "%s" must hold 24 nonnegative values' % key)


@attr.s(frozen=True)
class CitySpec(object):
    """ Grid, archetype and population law of a synthetic city """
    seed = attr.ib(default=0)
    n_regions = attr.ib(default=10)
    grid_side = attr.ib(default=4)
    origin_lat = attr.ib(default=40.70)
    origin_lon = attr.ib(default=-74.02)
    cell_degrees = attr.ib(default=0.01)
    jitter = attr.ib(default=0.1)
    attribute_names = attr.ib(default=DEFAULT_ATTRIBUTE_NAMES, converter=list)
    attributes_per_region = attr.ib(default=3)
    archetypes = attr.ib(default=DEFAULT_ARCHETYPES, converter=dict, validator=_validate_archetypes)
    archetype_weights = attr.ib(default=None)
    population_log_mean = attr.ib(default=7.0)
    population_log_sigma = attr.ib(default=0.5)

    @property
    def archetype_names(self):
        return sorted(self.archetypes)

    def weights(self):
        names = self.archetype_names
        raw = np.array([(self.archetype_weights or {}).get(name, 1.0) for name in names],
                       dtype=np.float64)
        if raw.sum() <= 0:
            raise RactcUsageError('ERROR: Archetype weights must not all be zero')
        return raw / raw.sum()


@attr.s(frozen=True)
class ProcessSpec(object):
    """ Gravity-type intensity law with diurnal profiles per archetype pair """
    base_rate = attr.ib(default=0.02)
    a = attr.ib(default=1.0)
    b = attr.ib(default=1.0)
    c = attr.ib(default=2.0)
    start = attr.ib(default=DEFAULT_START)
    profiles = attr.ib(default=DEFAULT_PROFILES, converter=dict, validator=_validate_profiles)
    weekend_profiles = attr.ib(default=None, validator=_validate_profiles)
    default_profile = attr.ib(default=DEFAULT_PROFILE, converter=list)
    weekday_factors = attr.ib(default=(1.0,) * 7, converter=tuple)

    @weekday_factors.validator
    def _check_weekday_factors(self, attribute, value):
        if len(value) != 7 or min(value) < 0:
            raise RactcUsageError('ERROR: weekday_factors must hold 7 nonnegative values')

    def profile(self, origin_archetype, destination_archetype, weekday):
        """ 24-hour profile of an archetype pair; weekend profiles apply on Saturday/Sunday """
        key = profile_key(origin_archetype, destination_archetype)
        if weekday >= 5 and self.weekend_profiles is not None:
            return self.weekend_profiles.get(key, self.default_profile)
        return self.profiles.get(key, self.default_profile)


@attr.s(frozen=True, eq=False)
class City(object):
    """ Generated regions with their archetype names """
    spec = attr.ib()
    regions = attr.ib()
    archetypes = attr.ib()


@attr.s(frozen=True, eq=False)
class SynthTrips(object):
    """ Trips sorted by time plus the sampler's per-slot tallies (slots x N x N) """
    trips = attr.ib(repr=False)
    tallies = attr.ib(repr=False)
    start = attr.ib()
    tau = attr.ib()
    days = attr.ib()


def city_spec_from_dict(document, seed=None):
    values = dict(document or {})
    if seed is not None:
        values['seed'] = seed
    return CitySpec(**values)


def process_spec_from_dict(document):
    return ProcessSpec(**dict(document or {}))


def generate_city(spec):
    """
    Place n regions on the first n cells of the grid, sample archetypes, attribute sets and
    log-normal populations from the 'synth/city' stream of the spec seed.
    """
    if spec.n_regions > spec.grid_side ** 2:
        raise RactcUsageError('ERROR: %s regions do not fit a %s x %s grid' % (
            spec.n_regions, spec.grid_side, spec.grid_side))
    rng = derive_rng(spec.seed, STREAM_SYNTH + '/city')
    count = spec.n_regions
    cells = np.arange(count)
    offsets = rng.uniform(-0.5, 0.5, size=(count, 2)) * spec.jitter
    lats = spec.origin_lat + (cells // spec.grid_side + 0.5 + offsets[:, 0]) * spec.cell_degrees
    lons = spec.origin_lon + (cells % spec.grid_side + 0.5 + offsets[:, 1]) * spec.cell_degrees
    names = spec.archetype_names
    chosen = rng.choice(len(names), size=count, p=spec.weights())
    attribute_count = len(spec.attribute_names)
    regions = []
    archetypes = []
    for region_id in range(count):
        archetype = names[chosen[region_id]]
        probabilities = np.asarray(spec.archetypes[archetype], dtype=np.float64)
        draws = min(spec.attributes_per_region, int(np.count_nonzero(probabilities)))
        attributes = rng.choice(attribute_count, size=draws, replace=False, p=probabilities)
        population = max(1, int(round(rng.lognormal(spec.population_log_mean,
                                                    spec.population_log_sigma))))
        regions.append(geodata.Region(id=region_id, lat=float(lats[region_id]),
                                      lon=float(lons[region_id]), population=population,
                                      attributes=frozenset(int(a) for a in attributes)))
        archetypes.append(archetype)
    return City(spec=spec, regions=geodata.RegionTable(regions, list(spec.attribute_names)),
                archetypes=archetypes)


def hourly_intensity(city, process, weekday, hour, distances=None):
    """ N x N expected trips per hour for a weekday (Monday 0) and hour; diagonal 0 """
    if distances is None:
        distances = geodata.build_distance_matrix(city.regions).values
    m = np.asarray(city.regions.populations, dtype=np.float64)
    count = m.size
    values = np.zeros((count, count))
    factor = process.base_rate * process.weekday_factors[weekday]
    if factor == 0:
        return values
    for i in range(count):
        for j in range(count):
            if i == j or distances[i, j] <= 0:
                continue
            profile = process.profile(city.archetypes[i], city.archetypes[j], weekday)
            values[i, j] = (factor * m[i] ** process.a * m[j] ** process.b *
                            distances[i, j] ** -process.c * profile[hour])
    return values


def _slots(process, days, tau):
    """ (day, slot, slot start, weekday, hour) of every slot """
    for day in range(days):
        for slot in range(geodata.SECONDS_PER_DAY // tau):
            slot_start = process.start + day * geodata.SECONDS_PER_DAY + slot * tau
            moment = datetime.datetime.fromtimestamp(slot_start, pytz.utc)
            yield day, slot, slot_start, moment.weekday(), moment.hour


def _check_span(days, tau):
    if days < 1:
        raise RactcUsageError('ERROR: days must be >= 1, got %s' % days)
    if tau <= 0 or geodata.SECONDS_PER_DAY % tau:
        raise RactcUsageError('ERROR: tau must divide one day, got %s' % tau)


def expected_trip_count(city, process, days, tau=3600):
    """ Sum of the intensities over every slot and pair, i.e. the expected number of trips """
    _check_span(days, tau)
    distances = geodata.build_distance_matrix(city.regions).values
    hourly = {}
    total = 0.0
    for _, _, _, weekday, hour in _slots(process, days, tau):
        if (weekday, hour) not in hourly:
            hourly[weekday, hour] = hourly_intensity(city, process, weekday, hour, distances).sum()
        total += hourly[weekday, hour] * float(tau) / geodata.SECONDS_PER_HOUR
    return total


def poisson_inversion(lam, rng):
    """ Poisson draw by CDF inversion; large rates are split into additive chunks """
    if lam <= 0:
        return 0
    total = 0
    remaining = float(lam)
    while remaining > 0:
        rate = min(remaining, POISSON_CHUNK)
        remaining -= rate
        u = rng.random()
        k = 0
        p = math.exp(-rate)
        cumulative = p
        while u > cumulative and p > 0:
            k += 1
            p *= rate / k
            cumulative += p
        total += k
    return total


def generate_trips(city, process, days, tau=3600, seed=None):
    """
    Sample trips for `days` days of `tau`-second slots starting at process.start.
    :param seed: root seed of the per-slot streams 'synth/<day>/<slot>' (city seed by default)
    :return: SynthTrips
    """
    _check_span(days, tau)
    seed = city.spec.seed if seed is None else seed
    distances = geodata.build_distance_matrix(city.regions).values
    count = len(city.regions)
    slots = geodata.SECONDS_PER_DAY // tau
    tallies = np.zeros((days * slots, count, count), dtype=np.int64)
    trips = []
    cache = {}
    for day, slot, slot_start, weekday, hour in _slots(process, days, tau):
        if (weekday, hour) not in cache:
            cache[weekday, hour] = hourly_intensity(city, process, weekday, hour, distances)
        rates = cache[weekday, hour] * (float(tau) / geodata.SECONDS_PER_HOUR)
        rng = derive_rng(seed, '%s/%s/%s' % (STREAM_SYNTH, day, slot))
        for i in range(count):
            for j in range(count):
                trip_count = poisson_inversion(rates[i, j], rng)
                tallies[day * slots + slot, i, j] = trip_count
                for _ in range(trip_count):
                    timestamp = slot_start + int(math.floor(rng.random() * tau))
                    trips.append(geodata.TripRecord(origin=i, destination=j, timestamp=timestamp))
    trips.sort(key=lambda trip: (trip.timestamp, trip.origin, trip.destination))
    return SynthTrips(trips=trips, tallies=tallies, start=process.start, tau=tau, days=days)


def _write_rows(path, header, rows):
    with io.open(path, 'w', encoding='utf-8', newline='') as output_file:
        writer = csv.writer(output_file, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_city(out_dir, city):
    """ Write regions.csv, attributes.csv and attribute_vocab.csv """
    _write_rows(os.path.join(out_dir, constants.FILENAME_REGIONS), constants.HEADER_REGIONS,
                ([region.id, repr(region.lat), repr(region.lon), int(region.population)]
                 for region in city.regions))
    _write_rows(os.path.join(out_dir, constants.FILENAME_ATTRIBUTES), constants.HEADER_ATTRIBUTES,
                ([region.id, attribute_id] for region in city.regions
                 for attribute_id in sorted(region.attributes)))
    _write_rows(os.path.join(out_dir, constants.FILENAME_ATTRIBUTE_VOCAB),
                constants.HEADER_ATTRIBUTE_VOCAB, enumerate(city.regions.attribute_names))


def write_trips(path, synth_trips):
    _write_rows(path, constants.HEADER_TRIPS,
                ([trip.origin, trip.destination, geodata.format_timestamp(trip.timestamp)]
                 for trip in synth_trips.trips))


def write_ground_truth(path, city, process):
    """ Expected trips per hour for every weekday, hour and ordered pair i != j """
    distances = geodata.build_distance_matrix(city.regions).values
    count = len(city.regions)

    def rows():
        for weekday in range(7):
            for hour in range(24):
                values = hourly_intensity(city, process, weekday, hour, distances)
                for i in range(count):
                    for j in range(count):
                        if i != j:
                            yield [weekday, hour, i, j, repr(float(values[i, j]))]
    _write_rows(path, constants.HEADER_GROUND_TRUTH, rows())
