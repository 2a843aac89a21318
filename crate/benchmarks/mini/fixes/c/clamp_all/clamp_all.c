/* Clamping. */

void clamp_all(int *values, int n, int lo, int hi)
{
    for (int i = 0; i < n; i++) {
        if (values[i] < lo) {
            values[i] = lo;
        } else if (values[i] > hi) {
            values[i] = hi;
        }
    }
}
