#include <stdio.h>
int main() {
    int a, b, c, avg;
    scanf("%d %d %d", &a, &b, &c);
    avg = (a + b + c) / 3;
    printf("%d\n", avg);
    return 0;
}
