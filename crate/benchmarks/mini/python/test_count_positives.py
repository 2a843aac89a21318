import unittest

from count_positives import count_positives


class CountPositivesTest(unittest.TestCase):
    def test_mixed(self):
        self.assertEqual(count_positives([-1, 0, 2, 3]), 2)

    def test_empty(self):
        self.assertEqual(count_positives([]), 0)


if __name__ == "__main__":
    unittest.main()
