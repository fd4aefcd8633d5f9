import io
import math
import os
import shutil
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from ractc import geodata
from ractc.ractcbase import RactcDataError, RactcUsageError


T0 = 1704067200  # 2024-01-01T00:00:00Z


def great_circle_oracle(a, b, radius=geodata.EARTH_RADIUS_KM):
    """ Spherical law of cosines """
    phi1, lambda1, phi2, lambda2 = [math.radians(value) for value in (a[0], a[1], b[0], b[1])]
    cosine = (math.sin(phi1) * math.sin(phi2) +
              math.cos(phi1) * math.cos(phi2) * math.cos(lambda2 - lambda1))
    return radius * math.acos(max(-1.0, min(1.0, cosine)))


def region_table(coordinates, attributes=None, names=None):
    regions = [geodata.Region(id=index, lat=lat, lon=lon, population=100,
                              attributes=(attributes or {}).get(index, ()))
               for index, (lat, lon) in enumerate(coordinates)]
    return geodata.RegionTable(regions, names or ['a', 'b', 'c'])


class TestParsers(unittest.TestCase):

    def test_empty_trip_stream(self):
        trips, report = geodata.parse_trips(io.StringIO(''), 3)
        self.assertEqual(trips, [])
        self.assertEqual(len(report), 0)

    def test_one_valid_trip(self):
        stream = io.StringIO('origin_id,dest_id,timestamp\n0,2,2024-01-01T08:15:00Z\n')
        trips, report = geodata.parse_trips(stream, 3)
        self.assertEqual(trips, [geodata.TripRecord(origin=0, destination=2, timestamp=T0 + 8 * 3600 + 900)])
        self.assertEqual(len(report), 0)

    def test_unknown_region_and_bad_timestamp_are_rejected_with_line_numbers(self):
        stream = io.StringIO(
            'origin_id,dest_id,timestamp\n'
            '# exported trips\n'
            '3,0,2024-01-01T08:00:00Z\n'
            '0,1,not-a-time\n'
            '1,0,2024-01-01T09:00:00\n')
        trips, report = geodata.parse_trips(stream, 3)
        self.assertEqual(len(trips), 1)
        self.assertEqual(trips[0].timestamp, T0 + 9 * 3600)
        self.assertEqual(report.line_numbers(), [3, 4])
        self.assertIn('line 3', report.summary())

    def test_region_map_translates_external_codes(self):
        mapping, report = geodata.load_region_map(
            io.StringIO('external_code,region_id\n36061000100,0\n36061000200,1\nbad,9\n'), 2)
        self.assertEqual(mapping, {'36061000100': 0, '36061000200': 1})
        self.assertEqual(report.line_numbers(), [4])
        trips, _ = geodata.parse_trips(io.StringIO('36061000200,36061000100,%s\n' % T0), 2,
                                       region_map=mapping)
        self.assertEqual((trips[0].origin, trips[0].destination), (1, 0))

    def test_regions_attributes_and_vocab(self):
        regions, report = geodata.parse_regions(io.StringIO(
            'id,lat,lon,population\n1,40.8,-73.9,50\n0,40.7,-74.0,120\n2,95.0,0,1\n'))
        self.assertEqual([region.id for region in regions], [0, 1])
        self.assertEqual(report.line_numbers(), [4])
        attributes, _ = geodata.parse_attributes(
            io.StringIO('region_id,attribute_id\n0,1\n0,1\n1,0\n'), 2)
        names, _ = geodata.parse_attribute_vocab(io.StringIO('attribute_id,name\n0,office\n1,park\n'))
        table = geodata.build_region_table(regions, attributes, names)
        self.assertEqual(table[0].attributes, frozenset([1]))
        npt.assert_array_equal(table.populations, [120.0, 50.0])

    def test_sparse_vocab_is_refused(self):
        with self.assertRaises(RactcDataError):
            geodata.parse_attribute_vocab(io.StringIO('0,office\n2,park\n'))

    def test_attribute_outside_vocabulary_is_rejected_at_its_line(self):
        attributes, report = geodata.parse_attributes(
            io.StringIO('region_id,attribute_id\n0,1\n1,2\n1,0\n'), 2, attribute_count=2)
        self.assertEqual(attributes, {0: {1}, 1: {0}})
        self.assertEqual(report.line_numbers(), [3])
        self.assertIn('vocabulary of 2', report.summary())

    def test_failing_trip_stream_reports_partial_count(self):
        def stream():
            yield 'origin_id,dest_id,timestamp\n'
            yield '0,1,2024-01-01T08:00:00Z\n'
            yield '1,2,2024-01-01T09:00:00Z\n'
            raise IOError('connection reset')

        with self.assertRaises(geodata.TripStreamError) as context:
            geodata.parse_trips(stream(), 3)
        self.assertEqual(context.exception.partial_count, 2)
        self.assertIn('connection reset', str(context.exception))
        self.assertTrue(issubclass(geodata.TripStreamError, RactcDataError))


class TestODSeries(unittest.TestCase):

    def test_no_trips_gives_zero_frames(self):
        series = geodata.build_od_series([], T0, 3600, 4, region_count=3)
        npt.assert_array_equal(series.frames, np.zeros((4, 3, 3)))

    def test_same_frame_trips_accumulate(self):
        trips = [geodata.TripRecord(0, 1, T0 + 10), geodata.TripRecord(0, 1, T0 + 20)]
        series = geodata.build_od_series(trips, T0, 3600, 2, region_count=2)
        self.assertEqual(series.frames[0, 0, 1], 2)

    def test_boundary_trip_belongs_to_later_frame(self):
        series = geodata.build_od_series([geodata.TripRecord(1, 0, T0 + 3600)], T0, 3600, 2,
                                         region_count=2)
        self.assertEqual(series.frames[0].sum(), 0)
        self.assertEqual(series.frames[1, 1, 0], 1)

    def test_out_of_span_trips_are_counted(self):
        trips = [geodata.TripRecord(0, 1, T0 - 1), geodata.TripRecord(0, 1, T0 + 7200),
                 geodata.TripRecord(1, 0, T0 + 5)]
        series = geodata.build_od_series(trips, T0, 3600, 2, region_count=2)
        self.assertEqual(series.out_of_span, 2)
        self.assertEqual(series.frames.sum(), 1)

    def test_total_equals_in_span_trip_count(self):
        rng = np.random.default_rng(4)
        trips = [geodata.TripRecord(int(o), int(d), int(t)) for o, d, t in zip(
            rng.integers(0, 5, 500), rng.integers(0, 5, 500), rng.integers(T0, T0 + 86400, 500))]
        series = geodata.build_od_series(trips, T0, 900, 96, region_count=5)
        self.assertEqual(series.frames.sum(), 500)
        self.assertEqual(series.out_of_span, 0)

    def test_non_positive_frame_count_is_refused(self):
        with self.assertRaises(RactcUsageError):
            geodata.build_od_series([], T0, 3600, 0)

    def test_frame_hours(self):
        series = geodata.build_od_series([], T0 + 22 * 3600, 3600, 4, region_count=1)
        npt.assert_array_equal(series.hours(), [22, 23, 0, 1])
        npt.assert_array_equal(series.hours(geodata.resolve_timezone('+02:00')), [0, 1, 2, 3])

    def test_cache_restores_series(self):
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 'od_series.npz')
            series = geodata.build_od_series([geodata.TripRecord(0, 1, T0 + 1)], T0, 3600, 3,
                                             region_count=2)
            geodata.save_od_series(path, series)
            loaded = geodata.load_od_series(path)
            npt.assert_array_equal(loaded.frames, series.frames)
            self.assertEqual((loaded.t0, loaded.tau), (T0, 3600))
        finally:
            shutil.rmtree(tmp)


class TestDistances(unittest.TestCase):

    def test_identical_points(self):
        self.assertEqual(geodata.haversine((40.7, -74.0), (40.7, -74.0)), 0.0)

    def test_antipodal_equator(self):
        distance = geodata.haversine((0.0, 0.0), (0.0, 180.0))
        self.assertAlmostEqual(distance / (math.pi * 6371.0), 1.0, delta=1e-9)

    def test_new_york_to_chicago(self):
        nyc, chicago = (40.7128, -74.0060), (41.8781, -87.6298)
        oracle = great_circle_oracle(nyc, chicago)
        self.assertLess(abs(geodata.haversine(nyc, chicago) - oracle) / oracle, 0.005)
        self.assertAlmostEqual(oracle, 1145, delta=10)

    def test_haversine_is_exactly_symmetric(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            self.assertEqual(geodata.haversine(a, b), geodata.haversine(b, a))

    def test_single_region_matrix(self):
        matrix = geodata.build_distance_matrix(region_table([(10.0, 10.0)]))
        npt.assert_array_equal(matrix.values, np.zeros((1, 1)))

    def test_matrix_symmetric_with_zero_diagonal(self):
        rng = np.random.default_rng(2)
        table = region_table(list(zip(rng.uniform(-60, 60, 6), rng.uniform(-170, 170, 6))))
        values = geodata.build_distance_matrix(table).values
        npt.assert_array_equal(values, values.T)
        npt.assert_array_equal(np.diag(values), np.zeros(6))

    def test_collinear_equatorial_points_add_up(self):
        values = geodata.build_distance_matrix(
            region_table([(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)])).values
        self.assertAlmostEqual(values[0, 2] / (values[0, 1] + values[1, 2]), 1.0, delta=1e-6)


class TestAttributesAndTime(unittest.TestCase):

    def test_attribute_rows(self):
        table = region_table([(0, 0), (0, 1)], attributes={1: [0, 2, 2]})
        values = geodata.build_attribute_matrix(table, 3).values
        npt.assert_array_equal(values, [[0, 0, 0], [1, 0, 1]])

    def test_bucketize(self):
        self.assertEqual(geodata.bucketize(T0 + 1800), 0)
        self.assertEqual(geodata.bucketize(T0 + 86399), 23)
        self.assertEqual(geodata.bucketize(T0 + 13 * 3600), 13)

    def test_bucketize_is_periodic_over_days(self):
        for offset in range(0, 86400, 3607):
            self.assertEqual(geodata.bucketize(T0 + offset), geodata.bucketize(T0 + offset + 86400))

    def test_unknown_timezone(self):
        with self.assertRaises(RactcUsageError):
            geodata.resolve_timezone('Mars/Olympus')


if __name__ == '__main__':
    unittest.main()
