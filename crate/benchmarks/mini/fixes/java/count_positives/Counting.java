public class Counting {
    public static int countPositives(int[] xs) {
        int count = 0;
        for (int x : xs) {
            if (x > 0) {
                count++;
            }
        }
        return count;
    }
}
