public class Clamp {
    public static void clampAll(int[] values, int lo, int hi) {
        for (int i = 0; i < values.length; i++) {
            if (values[i] < lo) {
                values[i] = hi;
            } else if (values[i] > hi) {
                values[i] = lo;
            }
        }
    }
}
