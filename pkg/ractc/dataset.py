"""
Dataset preparation: read the region, attribute and trip files named by a run configuration,
build the OD series and every structure computed once per dataset (relation matrices,
hypergraph operators, cluster labels, competition matrix, population levels, split), and
cache the expensive parts under the prepared folder.
"""
import csv
import io
import json
import math
import os
import warnings

import attr
import numpy as np

import constants
from ractc import geodata
from ractc.competition import CompetitionMatrix, cluster_labels, competition_matrix
from ractc.head import chronological_split
from ractc.population import DegeneratePopulationError, PopulationLevels, normalized_similarity, \
    population_levels, similarity_matrix
from ractc.preprocess import build_incidence, cooccurrence_adjacency, hypergraph_propagation, \
    relation_pairs
from ractc.ractcbase import RactcBase, RactcDataError, sha256_file


PREPARE_FORMAT = 'ractc-prepared-1'


@attr.s(eq=False)
class PreparedDataset(object):
    """ Everything the model and the baselines read, computed once per dataset """
    regions = attr.ib()
    attributes = attr.ib()
    distances = attr.ib()
    series = attr.ib()
    cluster_labels = attr.ib()
    competition = attr.ib()
    population = attr.ib(default=None)
    timezone = attr.ib(default='UTC')
    incidence = attr.ib(init=False)
    hyper_operator = attr.ib(init=False)
    cooccurrence = attr.ib(init=False)
    pop_operator = attr.ib(init=False)
    hours = attr.ib(init=False)
    pairs = attr.ib(init=False)
    split = attr.ib(init=False)

    def __attrs_post_init__(self):
        self.incidence = build_incidence(self.attributes)
        self.hyper_operator = hypergraph_propagation(self.incidence)
        self.cooccurrence = cooccurrence_adjacency(self.incidence)
        self.pop_operator = None
        if self.population is not None:
            self.pop_operator = normalized_similarity(self.population.similarity)
        self.hours = self.series.hours(geodata.resolve_timezone(self.timezone))
        self.pairs = relation_pairs(self.series)
        self.split = chronological_split(self.series.frame_count)

    @property
    def region_count(self):
        return len(self.regions)

    @property
    def attribute_count(self):
        return self.regions.attribute_count

    @property
    def frames(self):
        return self.series.frames


def default_span(trips, tau, t0=None):
    """
    t0 defaults to the start of the UTC day holding the earliest trip; frame_count covers
    the latest trip.
    :return: (t0, frame_count)
    """
    if not trips:
        raise RactcDataError('ERROR: No valid trips; cannot infer the frame span')
    if t0 is None:
        first = min(trip.timestamp for trip in trips)
        t0 = int(math.floor(first / geodata.SECONDS_PER_DAY)) * geodata.SECONDS_PER_DAY
    last = max(trip.timestamp for trip in trips)
    return t0, int(math.floor((last - t0) / tau)) + 1


def build_dataset(regions, series, k1, k2, seed, timezone='UTC', with_population=True):
    """
    Build a PreparedDataset from a RegionTable and an ODSeries.
    :param with_population: compute population levels
    """
    attributes = geodata.build_attribute_matrix(regions, regions.attribute_count)
    distances = geodata.build_distance_matrix(regions)
    labels = cluster_labels(attributes, k2, seed)
    competition = competition_matrix(attributes, distances, k2, seed)
    population = None
    if with_population:
        _, population = population_levels(regions.populations, k1)
    return PreparedDataset(regions=regions, attributes=attributes, distances=distances,
                           series=series, cluster_labels=labels, competition=competition,
                           population=population, timezone=timezone)


class DatasetBuilder(RactcBase):
    """ Reads the input files of a run configuration and prepares or loads the dataset """

    def __init__(self, run_config, verbosity=None):
        RactcBase.__init__(self, verbosity=verbosity)
        self.run_config = run_config
        self.prepared_dir = os.path.join(run_config.output_dir, constants.PREPARED_SUBFOLDER)

    def _open(self, path):
        self.require_file(path)
        return io.open(path, 'r', encoding='utf-8', newline='')

    def _report(self, report):
        if len(report):
            self.vlog(1, 'WARNING: %s' % report.summary())

    def read_region_table(self):
        """ Parse regions, attributes and the attribute vocabulary into a RegionTable """
        data = self.run_config.data
        with self._open(data['regions']) as stream:
            regions, report = geodata.parse_regions(stream, source=data['regions'])
        self._report(report)
        if not regions:
            raise RactcDataError('ERROR: "%s" holds no valid regions' % data['regions'])
        if [region.id for region in regions] != list(range(len(regions))):
            raise RactcDataError('ERROR: Region ids in "%s" must be dense 0..N-1' % data['regions'])
        names = None
        if data.get('attribute_vocab'):
            with self._open(data['attribute_vocab']) as stream:
                names, report = geodata.parse_attribute_vocab(stream, source=data['attribute_vocab'])
            self._report(report)
        with self._open(data['attributes']) as stream:
            attributes, report = geodata.parse_attributes(
                stream, len(regions), attribute_count=None if names is None else len(names),
                source=data['attributes'])
        self._report(report)
        if names is None:
            top = max([max(ids) for ids in attributes.values() if ids] or [-1])
            names = ['attribute_%s' % index for index in range(top + 1)]
        table = geodata.build_region_table(regions, attributes, names)
        self.vlog(1, 'Read %s regions with %s attributes' % (len(table), table.attribute_count))
        return table

    def read_trips(self, region_count):
        data = self.run_config.data
        region_map = None
        if data.get('region_map'):
            with self._open(data['region_map']) as stream:
                region_map, report = geodata.load_region_map(stream, region_count,
                                                             source=data['region_map'])
            self._report(report)
        with self._open(data['trips']) as stream:
            trips, report = geodata.parse_trips(stream, region_count, region_map=region_map,
                                                source=data['trips'])
        self._report(report)
        self.vlog(1, 'Read %s trips (%s rejected)' % (len(trips), len(report)))
        return trips

    def build_series(self, trips, region_count):
        data = self.run_config.data
        t0, frame_count = data.get('t0'), data.get('frame_count')
        if t0 is None or frame_count is None:
            t0, default_count = default_span(trips, data['tau'], t0)
            if frame_count is None:
                frame_count = default_count
        series = geodata.build_od_series(trips, t0, data['tau'], frame_count, region_count)
        if series.out_of_span:
            self.vlog(1, 'WARNING: %s trips fall outside the %s-frame span and were ignored' % (
                series.out_of_span, series.frame_count))
        self.vlog(1, 'Built %s frames of %s x %s OD matrices starting at %s' % (
            series.frame_count, region_count, region_count, geodata.format_timestamp(t0)))
        return series

    def input_files(self):
        data = self.run_config.data
        keys = ['regions', 'attributes', 'attribute_vocab', 'trips', 'region_map']
        return [(key, data[key]) for key in keys if data.get(key)]

    def fingerprint(self):
        """
        Hashes of the inputs and the settings the prepared artifacts depend on. The seed and
        the ablations are left out: every run shares one prepared folder, and cluster labels
        of another seed are recomputed on load.
        """
        train = self.run_config.train
        data = self.run_config.data
        return {
            'format': PREPARE_FORMAT,
            'inputs': dict((key, sha256_file(self.require_file(path)))
                           for key, path in self.input_files()),
            'k1': train.k1,
            'k2': train.k2,
            't0': data['t0'],
            'tau': data['tau'],
            'frame_count': data['frame_count'],
            'timezone': data['timezone'],
        }

    def build(self):
        """ Read the inputs and build the dataset in memory """
        train = self.run_config.train
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            regions = self.read_region_table()
            series = self.build_series(self.read_trips(len(regions)), len(regions))
            timezone = self.run_config.data['timezone']
            try:
                dataset = build_dataset(regions, series, train.k1, train.k2, train.seed,
                                        timezone=timezone)
            except DegeneratePopulationError as error:
                if not train.ablated('no_pop'):
                    raise
                self.vlog(1, 'WARNING: %s' % error)
                dataset = build_dataset(regions, series, train.k1, train.k2, train.seed,
                                        timezone=timezone, with_population=False)
        self.log_warnings(caught)
        return dataset

    def _path(self, filename):
        return os.path.join(self.prepared_dir, filename)

    def _read_manifest(self):
        path = self._path(constants.FILENAME_PREPARE_MANIFEST)
        if not os.path.isfile(path):
            return None
        with open(path) as manifest_file:
            return json.load(manifest_file)

    def prepare(self, force=False):
        """
        Build the dataset and write the prepared artifacts. Skipped when the stored
        fingerprint matches the current inputs and settings.
        :return: True if artifacts were written, False if they were already current
        """
        fingerprint = self.fingerprint()
        manifest = self._read_manifest()
        if not force and manifest is not None and manifest.get('fingerprint') == fingerprint:
            self.vlog(1, 'Prepared artifacts in "%s" are current' % self.prepared_dir)
            return False
        dataset = self.build()
        self.write_prepared(dataset, fingerprint)
        return True

    def write_prepared(self, dataset, fingerprint):
        self.ensure_directory(self.prepared_dir)
        geodata.save_od_series(self._path(constants.FILENAME_OD_SERIES), dataset.series)
        with open(self._path(constants.FILENAME_CLUSTER_LABELS), 'w', newline='') as output_file:
            writer = csv.writer(output_file, lineterminator='\n')
            writer.writerow(constants.HEADER_CLUSTER_LABELS)
            for region_id, label in enumerate(dataset.cluster_labels):
                writer.writerow([region_id, int(label)])
        with open(self._path(constants.FILENAME_COMPETITION_MATRIX), 'w', newline='') as output_file:
            writer = csv.writer(output_file, lineterminator='\n')
            for row in dataset.competition.values:
                writer.writerow([int(value) for value in row])
        if dataset.population is not None:
            with open(self._path(constants.FILENAME_POPULATION_LEVELS), 'w',
                      newline='') as output_file:
                writer = csv.writer(output_file, lineterminator='\n')
                writer.writerow(constants.HEADER_POPULATION_LEVELS)
                for region, level in zip(dataset.regions, dataset.population.levels):
                    writer.writerow([region.id, repr(float(region.population)), int(level)])
        split = dataset.split.to_dict()
        split['sizes'] = [stop - start for start, stop in
                          (dataset.split.train, dataset.split.validation, dataset.split.test)]
        with open(self._path(constants.FILENAME_SPLIT), 'w') as output_file:
            json.dump(split, output_file, indent=2, sort_keys=True)
        with open(self._path(constants.FILENAME_PREPARE_MANIFEST), 'w') as output_file:
            json.dump({'fingerprint': fingerprint,
                       'cluster_seed': self.run_config.train.seed,
                       'population': dataset.population is not None,
                       'frames': dataset.series.frame_count,
                       'regions': dataset.region_count,
                       'out_of_span': dataset.series.out_of_span}, output_file, indent=2,
                      sort_keys=True)
        self.vlog(1, 'Wrote prepared artifacts to "%s" (split %s)' % (
            self.prepared_dir, '/'.join(str(size) for size in split['sizes'])))

    def load(self):
        """ Load the prepared dataset, refusing artifacts built from other inputs or settings """
        manifest = self._read_manifest()
        if manifest is None:
            raise RactcDataError('ERROR: No prepared artifacts in "%s"; run the prepare command' % (
                self.prepared_dir))
        if manifest.get('fingerprint') != self.fingerprint():
            raise RactcDataError(
                'ERROR: Prepared artifacts in "%s" were built from other inputs or settings; '
                'rerun the prepare command' % self.prepared_dir)
        train = self.run_config.train
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            regions = self.read_region_table()
            series = geodata.load_od_series(self.require_file(
                self._path(constants.FILENAME_OD_SERIES)))
            attributes = geodata.build_attribute_matrix(regions, regions.attribute_count)
            distances = geodata.build_distance_matrix(regions)
            if manifest.get('cluster_seed') == train.seed:
                labels = self._read_column(constants.FILENAME_CLUSTER_LABELS, 1)
                comp = CompetitionMatrix(values=np.loadtxt(
                    self.require_file(self._path(constants.FILENAME_COMPETITION_MATRIX)),
                    delimiter=',', dtype=np.int64, ndmin=2), labels=None)
            else:
                self.vlog(1, 'Clustering regions for seed %s (prepared with seed %s)' % (
                    train.seed, manifest.get('cluster_seed')))
                labels = cluster_labels(attributes, train.k2, train.seed)
                comp = competition_matrix(attributes, distances, train.k2, train.seed)
            population = None
            if manifest.get('population'):
                levels = self._read_column(constants.FILENAME_POPULATION_LEVELS, 2)
                population = PopulationLevels(k1=train.k1, levels=levels,
                                              similarity=similarity_matrix(levels))
            dataset = PreparedDataset(
                regions=regions, attributes=attributes, distances=distances, series=series,
                cluster_labels=labels, competition=comp,
                population=population, timezone=self.run_config.data['timezone'])
        self.log_warnings(caught)
        self.vlog(1, 'Loaded prepared dataset: %s regions, %s frames' % (
            dataset.region_count, series.frame_count))
        return dataset

    def _read_column(self, filename, column):
        path = self.require_file(self._path(filename))
        with open(path, newline='') as input_file:
            rows = list(csv.reader(input_file))
        return np.array([int(row[column]) for row in rows[1:]], dtype=np.int64)
