import unittest

from max_sublist_sum import max_sublist_sum


class MaxSublistSumTest(unittest.TestCase):
    def test_gap(self):
        self.assertEqual(max_sublist_sum([1, 2, -1, 3]), 5)

    def test_negative(self):
        self.assertEqual(max_sublist_sum([-3, -1, -2]), -1)


if __name__ == "__main__":
    unittest.main()
